mod common;

use common::{all_matchings, brute_force_best, Stream};
use fpmatch_core::assignment::max_weight_matching;
use fpmatch_core::mcmc::{argmax_xi, Pair};
use fpmatch_core::model::{log_joint_hp, FixedParams, LatentParams};
use fpmatch_core::types::xi_space_size;
use fpmatch_core::{Complex64, Matching};
use proptest::prelude::*;

#[test]
fn space_size_matches_enumeration_and_is_symmetric() {
    for na in 0..=4 {
        for nb in 0..=4 {
            assert_eq!(xi_space_size(na, nb).unwrap(), all_matchings(na, nb).len() as u128, "({na},{nb})");
        }
    }
    for na in 0..=8 {
        for nb in 0..=8 {
            assert_eq!(xi_space_size(na, nb), xi_space_size(nb, na));
        }
    }
    assert_eq!(xi_space_size(3, 3), Some(34));
}

fn random_weights(s: &mut Stream, na: usize, nb: usize) -> Vec<f64> {
    (0..na * nb)
        .map(|_| {
            let u = s.next_f64();
            if u < 0.15 {
                f64::NEG_INFINITY
            } else {
                6.0 * s.normal()
            }
        })
        .collect()
}

fn total(w: &[f64], nb: usize, edges: &[(usize, usize)]) -> f64 {
    edges.iter().map(|&(a, b)| w[a * nb + b]).sum()
}

#[test]
fn assignment_equals_exhaustive_search() {
    for seed in 0..300u64 {
        let mut s = Stream(seed);
        let (na, nb) = (1 + seed as usize % 3, 1 + (seed as usize / 3) % 3);
        let w = random_weights(&mut s, na, nb);
        let (best, _) = brute_force_best(&w, na, nb);
        let got = max_weight_matching(&w, na, nb);
        assert!(got.iter().all(|&(a, b)| w[a * nb + b] > 0.0));
        assert!((total(&w, nb, &got) - best).abs() < 1e-9, "seed {seed}");
    }
}

#[test]
fn assignment_equals_exhaustive_search_8x8() {
    for seed in 0..3u64 {
        let mut s = Stream(1000 + seed);
        let w = random_weights(&mut s, 8, 8);
        let (best, _) = brute_force_best(&w, 8, 8);
        let got = max_weight_matching(&w, 8, 8);
        assert!((total(&w, 8, &got) - best).abs() < 1e-9, "seed {seed}");
    }
}

fn fixed() -> FixedParams {
    FixedParams { rho0: 8.0, omega: 0.2, kappa: 4.0, ..FixedParams::default() }
}

fn theta() -> LatentParams {
    LatentParams {
        delta_a: 0.7,
        delta_b: 0.6,
        tau_a: Complex64::new(0.1, 0.0),
        tau_b: Complex64::new(-0.2, 0.3),
        sigma: 1.0,
        psi: Complex64::cis(0.4),
    }
}

#[test]
fn argmax_xi_maximizes_the_joint() {
    let (f, th) = (fixed(), theta());
    for seed in 0..40u64 {
        let mut s = Stream(2000 + seed);
        let a = s.config("a", 3);
        // B is a noisy copy of A's first points, plus clutter.
        let b = s.config("b", 3);
        let pair = Pair::new(&a, &b).unwrap();
        let got = argmax_xi(&pair, &th, &f).unwrap();
        let got_val = log_joint_hp(&a, &b, &got, &th, &f).unwrap();
        let best = all_matchings(3, 3)
            .into_iter()
            .map(|e| log_joint_hp(&a, &b, &Matching::from_edges(3, 3, e).unwrap(), &th, &f).unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((got_val - best).abs() <= 1e-9 * best.abs(), "seed {seed}: {got_val} vs {best}");
    }
}

#[test]
fn argmax_xi_exhaustive_8x8() {
    let (f, th) = (fixed(), theta());
    let mut s = Stream(77);
    let a = s.config("a", 8);
    let moved: Vec<_> = a
        .minutiae()
        .iter()
        .map(|m| {
            let r = (m.location() - th.tau_a) * th.psi.conj() + th.tau_b + Complex64::new(0.1 * s.normal(), 0.1 * s.normal());
            fpmatch_core::Minutia::from_orientation(r, m.orientation() * th.psi.conj(), m.mtype()).unwrap()
        })
        .collect();
    let b = fpmatch_core::MinutiaConfig::new("b", moved);
    let pair = Pair::new(&a, &b).unwrap();
    let w = pair.weights(&th, &f).unwrap();
    let (best, _) = brute_force_best(&w, 8, 8);
    let got = argmax_xi(&pair, &th, &f).unwrap();
    let edges: Vec<_> = got.edges().collect();
    assert!(!edges.is_empty());
    assert!((total(&w, 8, &edges) - best).abs() < 1e-9);
}

#[test]
fn argmax_is_fixed_point_of_single_moves() {
    // No re-pairing of one b (including unmatching it) improves the joint.
    let (f, th) = (fixed(), theta());
    for seed in 0..20u64 {
        let mut s = Stream(3000 + seed);
        let a = s.config("a", 5);
        let b = s.config("b", 4);
        let pair = Pair::new(&a, &b).unwrap();
        let xi = argmax_xi(&pair, &th, &f).unwrap();
        let base = log_joint_hp(&a, &b, &xi, &th, &f).unwrap();
        for beta in 0..4 {
            let mut cand = xi.clone();
            cand.remove_b(beta);
            let options: Vec<Option<usize>> = std::iter::once(None).chain((0..5).map(Some)).collect();
            for choice in options {
                let mut c = cand.clone();
                if let Some(i) = choice {
                    c.remove_a(i);
                    c.insert(i, beta).unwrap();
                }
                let v = log_joint_hp(&a, &b, &c, &th, &f).unwrap();
                assert!(v <= base + 1e-9 * base.abs(), "seed {seed}: move improves {v} > {base}");
            }
        }
    }
}

#[derive(Debug, Clone)]
enum Op {
    Insert(usize, usize),
    RemoveA(usize),
    RemoveB(usize),
    Swap(usize, usize),
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        (0usize..7, 0usize..7).prop_map(|(a, b)| Op::Insert(a, b)),
        (0usize..7).prop_map(Op::RemoveA),
        (0usize..7).prop_map(Op::RemoveB),
        (0usize..7, 0usize..7).prop_map(|(a, b)| Op::Swap(a, b)),
    ]
}

proptest! {
    #[test]
    fn matching_stays_valid(na in 0usize..7, nb in 0usize..7, ops in proptest::collection::vec(op(), 0..60)) {
        let mut xi = Matching::empty(na, nb);
        for o in ops {
            match o {
                Op::Insert(a, b) => {
                    let ok = a < na && b < nb && xi.partner_of_a(a).is_none() && xi.partner_of_b(b).is_none();
                    prop_assert_eq!(xi.insert(a, b).is_ok(), ok);
                }
                Op::RemoveA(a) if a < na => { xi.remove_a(a); }
                Op::RemoveB(b) if b < nb => { xi.remove_b(b); }
                // Move a to b, as the swap move of the sampler does.
                Op::Swap(a, b) if a < na && b < nb => {
                    xi.remove_a(a);
                    xi.remove_b(b);
                    xi.insert(a, b).unwrap();
                }
                _ => {}
            }
            let edges: Vec<_> = xi.edges().collect();
            let mut seen_a = vec![false; na];
            let mut seen_b = vec![false; nb];
            for &(a, b) in &edges {
                prop_assert!(!seen_a[a] && !seen_b[b]);
                seen_a[a] = true;
                seen_b[b] = true;
                prop_assert_eq!(xi.partner_of_a(a), Some(b));
                prop_assert_eq!(xi.partner_of_b(b), Some(a));
            }
            prop_assert_eq!(edges.len(), xi.len());
            prop_assert!(Matching::from_edges(na, nb, edges).is_ok());
        }
    }

    #[test]
    fn assignment_never_loses_to_greedy(seed in any::<u64>(), na in 1usize..7, nb in 1usize..7) {
        let mut s = Stream(seed);
        let w = random_weights(&mut s, na, nb);
        let got = max_weight_matching(&w, na, nb);
        // Greedy by descending positive weight is a feasible lower bound.
        let mut order: Vec<usize> = (0..na * nb).filter(|&k| w[k] > 0.0).collect();
        order.sort_by(|&x, &y| w[y].total_cmp(&w[x]));
        let (mut ua, mut ub) = (vec![false; na], vec![false; nb]);
        let mut greedy = 0.0;
        for k in order {
            let (a, b) = (k / nb, k % nb);
            if !ua[a] && !ub[b] {
                ua[a] = true;
                ub[b] = true;
                greedy += w[k];
            }
        }
        prop_assert!(total(&w, nb, &got) >= greedy - 1e-9);
        prop_assert!(Matching::from_edges(na, nb, got).is_ok());
    }
}
