//! End-to-end runs through the public API on four points on a line:
//! {0, 3, 4, 7} with K = 2 has minima at J = 26/3, 9, 26/3 joined by two
//! crossing points at J = 10.

use kmland::analysis::compare::adjusted_rand_index;
use kmland::analysis::disconnectivity::{build_disconnectivity, default_range};
use kmland::kmeans::{explore, MinimizerConfig};
use kmland::landscape::ValidationTolerances;
use kmland::network::{elementary_rate, grow_connected, Network, RateParams};
use kmland::{Dataset, Landscape, Landscape64, Scalar, SearchConfig};

fn toy<T: Scalar>() -> Dataset<T> {
    let rows: Vec<Vec<T>> = [0.0, 3.0, 4.0, 7.0]
        .iter()
        .map(|&x| vec![T::lit(x)])
        .collect();
    Dataset::from_rows(&rows)
        .unwrap()
        .with_labels(&[0, 0, 1, 1])
}

fn build<T: Scalar>() -> (Dataset<T>, Landscape<T>) {
    let d = toy::<T>();
    let mut land = Landscape::new(&d, 2, 3, "test");
    explore(
        &d,
        &mut land.minima,
        200,
        3,
        0,
        &MinimizerConfig::default(),
        false,
    );
    let report = grow_connected(
        d.points(),
        &mut land,
        20,
        &SearchConfig::for_dataset(&d),
        1e-3,
    )
    .unwrap();
    assert!(report.connected);
    (d, land)
}

fn sorted_costs<T: Scalar>(land: &Landscape<T>) -> Vec<f64> {
    let mut c: Vec<f64> = land
        .minima
        .records()
        .iter()
        .map(|m| m.cost.to_f64().unwrap())
        .collect();
    c.sort_by(f64::total_cmp);
    c
}

#[test]
fn toy_landscape_in_double_precision() {
    let (d, land) = build::<f64>();
    let c = sorted_costs(&land);
    assert_eq!(c.len(), 3);
    assert!((c[0] - 26.0 / 3.0).abs() < 1e-12 && (c[1] - 26.0 / 3.0).abs() < 1e-12);
    assert!((c[2] - 9.0).abs() < 1e-12);
    assert_eq!(land.transition_states.len(), 2);
    for ts in &land.transition_states {
        assert!((ts.cost - 10.0).abs() < 1e-3, "{}", ts.cost);
    }
    assert!(land
        .validate(&d, &ValidationTolerances::default())
        .is_empty());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("land.json");
    land.save(&path).unwrap();
    let back = Landscape64::load(&path).unwrap();
    assert_eq!(back.to_json().unwrap(), land.to_json().unwrap());
}

#[test]
fn toy_rate_matches_three_state_first_passage() {
    let (_, land) = build::<f64>();
    let net = Network::from_landscape(&land, 1e-3).unwrap();
    let gm = net.global_minimum().unwrap();
    let mid = (0..3)
        .max_by(|&a, &b| net.cost(a).total_cmp(&net.cost(b)))
        .unwrap();
    let other = (0..3).find(|&i| i != gm && i != mid).unwrap();
    let ts_between = |a: usize, b: usize| {
        land.transition_states
            .iter()
            .find(|t| t.connected.contains(&a) && t.connected.contains(&b))
            .unwrap()
            .cost
    };
    for t in [0.5, 1.0, 2.0] {
        let p = RateParams::new(t).unwrap();
        let j_a = ts_between(other, mid);
        let j_b = ts_between(mid, gm);
        let k_ai = elementary_rate(net.cost(other), j_a, p).unwrap();
        let k_ia = elementary_rate(net.cost(mid), j_a, p).unwrap();
        let k_ib = elementary_rate(net.cost(mid), j_b, p).unwrap();
        let want = k_ai * k_ib / (k_ai + k_ia + k_ib);
        let got = net.overall_rate(&[other], &[gm], p).unwrap();
        assert!((got - want).abs() <= 1e-10 * want, "T={t}: {got} vs {want}");
    }
    let path = net
        .fastest_path(other, gm, RateParams::new(1.0).unwrap())
        .unwrap();
    assert_eq!(path.minima(), vec![other, mid, gm]);

    let (lo, hi) = default_range(&net);
    let tree = build_disconnectivity(&net, 50, lo, hi).unwrap();
    assert_eq!(tree.leaves.len(), 3);
    assert!(tree.is_nested());
}

#[test]
fn toy_landscape_in_single_precision() {
    let (d, land) = build::<f32>();
    let c = sorted_costs(&land);
    assert_eq!(c.len(), 3);
    assert!((c[0] - 26.0 / 3.0).abs() < 1e-4 && (c[2] - 9.0).abs() < 1e-4);
    assert_eq!(land.transition_states.len(), 2);
    for ts in &land.transition_states {
        assert!((ts.cost - 10.0).abs() < 1e-2, "{}", ts.cost);
    }
    let truth = [0, 0, 1, 1];
    let best = land
        .minima
        .records()
        .iter()
        .map(|m| adjusted_rand_index(m.assignment().labels(), &truth).unwrap())
        .fold(f64::MIN, f64::max);
    assert_eq!(best, 1.0);
    assert_eq!(d.len(), 4);
}
