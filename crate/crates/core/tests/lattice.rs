use proptest::prelude::*;
use shockmfg::lattice::{enumerate_nodes, z_of, Lattice, LatticeError, ShockVector, TimeGrid};

fn binom(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

#[test]
fn grid_endpoints() {
    let g = TimeGrid::new(2.0, 200).unwrap();
    assert_eq!(g.node(0), 0.0);
    assert_eq!(g.node(200), 2.0);
    assert!((g.node(37) - 0.37).abs() < 1e-15);
    assert!(TimeGrid::new(1.0, 1).is_err());
    assert!(TimeGrid::new(0.0, 10).is_err());
}

#[test]
fn small_enumerations() {
    let g = TimeGrid::new(1.0, 3).unwrap();
    let groups = enumerate_nodes(g, 1).unwrap();
    assert_eq!(groups[0].len(), 1);
    let keys: Vec<String> = groups[1].iter().map(|u| u.key()).collect();
    assert_eq!(keys, ["1", "2", "3"]);

    let g = TimeGrid::new(1.0, 4).unwrap();
    let sizes: Vec<usize> = enumerate_nodes(g, 2).unwrap().iter().map(Vec::len).collect();
    assert_eq!(sizes, [1, 4, 6]);

    let g = TimeGrid::new(2.0, 200).unwrap();
    assert_eq!(Lattice::new(g, 2).unwrap().level_sizes(), [1, 200, 19900]);
}

#[test]
fn lexicographic_order() {
    let g = TimeGrid::new(1.0, 6).unwrap();
    let groups = enumerate_nodes(g, 3).unwrap();
    for group in &groups {
        for w in group.windows(2) {
            assert!(w[0].indices() < w[1].indices());
        }
    }
}

#[test]
fn shift_examples() {
    let e = ShockVector::empty(2);
    let a = e.shift_forward(25).unwrap();
    assert_eq!(a.to_string(), "(25,NONE)");
    let b = a.shift_forward(120).unwrap();
    assert_eq!(b.to_string(), "(25,120)");
    assert!(matches!(b.shift_forward(150), Err(LatticeError::FullVector(_))));
    assert!(matches!(a.shift_forward(25), Err(LatticeError::NonMonotone { .. })));
    assert!(matches!(e.shift_forward(0), Err(LatticeError::NonMonotone { .. })));
    assert_eq!(b.shift_back().unwrap(), a);
    assert_eq!(a.shift_back().unwrap(), e);
    assert!(matches!(e.shift_back(), Err(LatticeError::EmptyVector)));
    assert_eq!(z_of(&e), 0);
    assert_eq!(z_of(&b), 2);
}

#[test]
fn slots_reject_gaps() {
    assert!(ShockVector::from_slots(&[None, Some(3)]).is_err());
    assert!(ShockVector::from_slots(&[Some(4), Some(3)]).is_err());
    let u = ShockVector::from_slots(&[Some(3), None]).unwrap();
    assert_eq!(u.slots(), vec![Some(3), None]);
}

#[test]
fn budget_is_enforced() {
    let g = TimeGrid::new(1.0, 100).unwrap();
    assert!(matches!(
        Lattice::with_budget(g, 3, 1000),
        Err(LatticeError::CapacityExceeded { .. })
    ));
}

proptest! {
    #[test]
    fn group_sizes_are_binomial(steps in 2usize..=20, cap in 0usize..=4) {
        let g = TimeGrid::new(1.0, steps).unwrap();
        let lat = Lattice::new(g, cap).unwrap();
        for (k, size) in lat.level_sizes().into_iter().enumerate() {
            prop_assert_eq!(size, binom(steps, k));
        }
        let points: usize = lat.nodes().iter().map(|n| n.len(steps)).sum();
        prop_assert_eq!(points, lat.total_points());
    }

    #[test]
    fn nodes_are_consistent(steps in 2usize..=12, cap in 1usize..=3) {
        let g = TimeGrid::new(1.0, steps).unwrap();
        let lat = Lattice::new(g, cap).unwrap();
        for (id, node) in lat.nodes().iter().enumerate() {
            prop_assert_eq!(node.start, node.u.last_index());
            prop_assert_eq!(node.level, node.u.z());
            prop_assert_eq!(lat.node_of(&node.u), Some(id));
            if let Some(p) = node.parent {
                prop_assert_eq!(&lat.node(p).u, &node.u.shift_back().unwrap());
                prop_assert_eq!(lat.child(p, node.start), Some(id));
            }
            if node.level < cap {
                for i in node.start + 1..=steps {
                    let c = lat.child(id, i).unwrap();
                    prop_assert_eq!(&lat.node(c).u, &node.u.shift_forward(i).unwrap());
                }
            }
        }
    }

    #[test]
    fn shift_roundtrip(mut idx in proptest::collection::btree_set(1usize..50, 0..4), i in 1usize..60) {
        let cap = 4;
        let v: Vec<usize> = std::mem::take(&mut idx).into_iter().collect();
        let u = ShockVector::from_indices(cap, &v).unwrap();
        match u.shift_forward(i) {
            Ok(w) => {
                prop_assert_eq!(z_of(&w), z_of(&u) + 1);
                prop_assert_eq!(&w.shift_back().unwrap(), &u);
            }
            Err(_) => prop_assert!(u.z() == cap || i <= u.last_index()),
        }
        if u.z() > 0 {
            prop_assert_eq!(z_of(&u.shift_back().unwrap()), z_of(&u) - 1);
        }
    }
}
