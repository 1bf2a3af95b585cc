use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use aoi_forge::aoi::{regulation, Allocation, LinkProfile};
use aoi_forge::network::{closed_form_outage, generate_topology, worst_case_rates, TopologyParams};
use aoi_forge::sca::{
    build_constraints, initialize_with, iterate, update_multipliers, ConstraintOrigin, ConvexSubproblem, ScaConfig,
    SurrogateObjective,
};
use aoi_forge::solver::{solve, BarrierOptions, SmoothConstraint};

#[test]
fn worst_case_rate_outage_is_order_statistic() {
    // F(min of M draws) has mean 1/(M+1) when F is the outage cdf
    let topo = generate_topology(6, 1, &TopologyParams::default()).unwrap();
    let m = 1000;
    let reps = 400;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let values: Vec<f64> = (0..reps)
        .map(|_| closed_form_outage(&topo, &worst_case_rates(&topo, m, &mut rng), 0))
        .collect();
    let mean = values.iter().sum::<f64>() / reps as f64;
    let expected = 1.0 / (m + 1) as f64;
    // variance of a Beta(1, M) variable
    let se = (m as f64 / ((m + 1) as f64).powi(2) / (m + 2) as f64 / reps as f64).sqrt();
    assert!((mean - expected).abs() <= 4.0 * se, "{mean} vs {expected}");
}

#[test]
fn worst_case_rate_shrinks_on_supersets() {
    let topo = generate_topology(6, 3, &TopologyParams::default()).unwrap();
    let few = worst_case_rates(&topo, 100, &mut ChaCha8Rng::seed_from_u64(4));
    let many = worst_case_rates(&topo, 1000, &mut ChaCha8Rng::seed_from_u64(4));
    for k in 0..3 {
        assert!(many[k] <= few[k]);
    }
}

#[test]
fn mixed_pair_descends_and_stays_feasible() {
    for seed in 0..5 {
        let topo = generate_topology(seed, 2, &TopologyParams::default()).unwrap();
        let profile = LinkProfile::uniform(2, 5e4, 10.0, 1).unwrap();
        let report = iterate(&topo, &profile, &ScaConfig { seed, ..ScaConfig::default() }).unwrap();
        assert!(report.converged());
        assert!(report.descent_violations.is_empty());
        for w in report.psi_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-8);
        }
        let a = &report.allocation;
        let rates: Vec<f64> = a.t.iter().map(|t| 5e4 / t).collect();
        for k in 0..2 {
            assert!(closed_form_outage(&topo, &rates, k) <= a.p[k] + 1e-6);
            assert!(regulation(a.t[k], a.p[k], 10.0) < 1.0);
        }
        assert_eq!(report.variable_count, 10);
    }
}

#[test]
fn high_power_shortens_transmissions() {
    let profile = LinkProfile::uniform(1, 5e4, 10.0, 0).unwrap();
    let base = generate_topology(9, 1, &TopologyParams::default()).unwrap();
    let mut last = (f64::INFINITY, f64::INFINITY);
    for q in [0.0, 20.0, 40.0, 60.0] {
        let report = iterate(&base.with_power_dbm(q), &profile, &ScaConfig::default()).unwrap();
        let (t, psi) = (report.allocation.t[0], report.final_psi());
        assert!(t < last.0 && psi < last.1, "q {q}: t {t}, psi {psi}");
        last = (t, psi);
    }
}

#[test]
fn paper_bilinear_coefficient_is_selectable() {
    let topo = generate_topology(1, 3, &TopologyParams::default()).unwrap();
    let profile = LinkProfile::uniform(3, 5e4, 10.0, 1).unwrap();
    let config = ScaConfig { paper_faithful_bilinear: true, ..ScaConfig::default() };
    let init = initialize_with(&topo, &profile, &config, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let paper = build_constraints(&init.fixed_point, &topo, &profile, &init.limits, &config).unwrap();
    let taylor = build_constraints(&init.fixed_point, &topo, &profile, &init.limits, &ScaConfig::default()).unwrap();
    // the coefficient only changes the constraint away from the anchor
    let bilinear = |s: &ConvexSubproblem, x: &[f64]| {
        s.constraints.iter().find(|c| c.origin == ConstraintOrigin::Bilinear && c.link == 0).unwrap().constraint.value(x)
    };
    assert!((bilinear(&paper, &taylor.anchor) - bilinear(&taylor, &taylor.anchor)).abs() < 1e-12);
    let mut probe = taylor.anchor.clone();
    probe[taylor.layout.p(0)] *= 1.5;
    assert_ne!(bilinear(&paper, &probe), bilinear(&taylor, &probe));
    // the run itself may or may not converge with the paper's coefficient
    let _ = iterate(&topo, &profile, &config);
}

/// Minimal value of `var` satisfying `g ≤ 0`, with `g` decreasing in `var`.
fn lower_limit(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

#[test]
fn single_link_subproblem_matches_grid() {
    let topo = generate_topology(14, 1, &TopologyParams::default()).unwrap();
    let profile = LinkProfile::uniform(1, 5e4, 10.0, 0).unwrap();
    let config = ScaConfig::default();
    let init = initialize_with(&topo, &profile, &config, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let fp = &init.fixed_point;
    let objective = SurrogateObjective::new(fp, &update_multipliers(fp, &profile).unwrap(), &profile);
    let sub = build_constraints(fp, &topo, &profile, &init.limits, &config).unwrap().with_objective(objective.clone());
    let opts = BarrierOptions::default();
    let (start, _) = sub.interior_start(&opts).unwrap();
    let sol = solve(&sub.to_nlp(start), &opts).unwrap();
    let solved = objective.value(&Allocation::new(vec![sol.x[0]], vec![sol.x[1]]));

    // chain the constraints: for each t take the smallest y, z, a and p they allow
    let l = sub.layout;
    let get = |o| sub.constraints.iter().find(|c| c.origin == o).unwrap().constraint.clone();
    let (rate, exp, product, bilinear, reg) = (
        get(ConstraintOrigin::RateCoupling),
        get(ConstraintOrigin::ExpLink),
        get(ConstraintOrigin::OutageProduct),
        get(ConstraintOrigin::Bilinear),
        get(ConstraintOrigin::Regulation),
    );
    let value_at = |t: f64| -> Option<f64> {
        let mut x = sub.anchor.clone();
        x[l.t(0)] = t;
        x[l.y(0)] = lower_limit(|y| { let mut v = x.clone(); v[l.y(0)] = y; rate.value(&v) }, -60.0, 60.0);
        x[l.z(0)] = lower_limit(|z| { let mut v = x.clone(); v[l.z(0)] = z; exp.value(&v) }, 0.0, 1e12);
        x[l.a(0)] = lower_limit(|a| { let mut v = x.clone(); v[l.a(0)] = a; product.value(&v) }, 1.0, 1e12);
        // bilinear bound is a convex quadratic in p; take its lower root
        let quad = |p: f64| { let mut v = x.clone(); v[l.p(0)] = p; bilinear.value(&v) };
        let (floor, ceiling) = (sub.lower[l.p(0)], sub.upper[l.p(0)]);
        let p = if quad(floor) <= 0.0 {
            floor
        } else {
            let vertex = x[l.a(0)].min(ceiling);
            if quad(vertex) > 0.0 {
                return None;
            }
            let mut lo = floor;
            let mut hi = vertex;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if quad(mid) <= 0.0 { hi = mid } else { lo = mid }
            }
            hi
        };
        x[l.p(0)] = p;
        (reg.value(&x) <= 0.0).then(|| objective.value(&Allocation::new(vec![t], vec![p])))
    };
    let (t_lo, t_hi) = (sub.lower[l.t(0)], sub.upper[l.t(0)]);
    let n = 20_000;
    let mut best = (f64::INFINITY, 0usize);
    let ts: Vec<f64> = (0..=n).map(|i| t_lo * (t_hi / t_lo).powf(i as f64 / n as f64)).collect();
    for (i, &t) in ts.iter().enumerate() {
        if let Some(v) = value_at(t) {
            if v < best.0 {
                best = (v, i);
            }
        }
    }
    // golden-section refinement between the neighbours of the best node
    let (mut a, mut b) = (ts[best.1.saturating_sub(1)], ts[(best.1 + 1).min(n)]);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let (c, d) = (b - phi * (b - a), a + phi * (b - a));
        if value_at(c).unwrap_or(f64::INFINITY) < value_at(d).unwrap_or(f64::INFINITY) { b = d } else { a = c }
    }
    let grid = value_at(0.5 * (a + b)).unwrap_or(best.0).min(best.0);
    assert!((solved - grid).abs() <= 1e-4 * grid.abs(), "solver {solved}, grid {grid}");
}
