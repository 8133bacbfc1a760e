use shockmfg::bounds::{
    compute_constants, contraction_check, epsilon, epsilon_n, k1, k2, v_max, value_gap_bound, BoundsData,
    Lipschitz,
};

fn data(q: f64) -> BoundsData {
    BoundsData {
        q_max: q,
        psi_max: 10.0,
        terminal_max: 0.0,
        lambda_max: 2.0,
        j_max: 2.0,
        lipschitz: Lipschitz {
            psi: 4.0,
            q: 1.0,
            terminal: 0.5,
            lambda: 0.25,
        },
    }
}

/// Term-by-term recomputation with explicit powers.
fn v_max_oracle(b: &BoundsData, t: f64, n: usize) -> f64 {
    let e = f64::exp((b.q_max + b.lambda_max) * t);
    let mut sum = 0.0;
    for i in 0..=n {
        let mut term = 1.0;
        for _ in 0..i {
            term *= e * b.lambda_max * t;
        }
        sum += term;
    }
    (b.terminal_max + b.psi_max * t) * e * sum
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

#[test]
fn v_max_matches_recomputation() {
    for q in [0.5, 3.0, 50.0] {
        let b = data(q);
        let got = v_max(&b, 2.0, 2);
        assert!(rel(got, v_max_oracle(&b, 2.0, 2)) <= 1e-12, "q = {q}");
    }
}

#[test]
fn zero_horizon_and_zero_intensity() {
    let mut b = data(3.0);
    b.terminal_max = 1.5;
    let vm = v_max(&b, 0.0, 2);
    assert_eq!(vm, 1.5);
    let l = b.lipschitz;
    assert_eq!(k1(&b, vm), l.psi + l.q * 1.5 + 2.0 * 1.5 * l.lambda);
    b.lambda_max = 0.0;
    let expect = (1.5 + 10.0 * 2.0) * f64::exp(3.0 * 2.0);
    assert!(rel(v_max(&b, 2.0, 5), expect) <= 1e-14);
    assert_eq!(k2(&b, 1.0), l.psi + l.q + 3.0);
}

#[test]
fn v_max_is_monotone() {
    let base = data(3.0);
    let t = 0.7;
    let v0 = v_max(&base, t, 2);
    let bumps: [fn(&mut BoundsData); 4] = [
        |b| b.terminal_max += 0.5,
        |b| b.psi_max += 0.5,
        |b| b.q_max += 0.5,
        |b| b.lambda_max += 0.5,
    ];
    for bump in bumps {
        let mut b = base;
        bump(&mut b);
        assert!(v_max(&b, t, 2) >= v0);
    }
    assert!(v_max(&base, t + 0.1, 2) >= v0);
    assert!(v_max(&base, t, 3) >= v0);
}

#[test]
fn contraction_value_grows_with_horizon() {
    let b = data(3.0);
    let (v0, ok0) = contraction_check(&b, 0.0, 2);
    assert_eq!(v0, 0.0);
    assert!(ok0);
    let mut prev = 0.0;
    for i in 1..=200 {
        let t = i as f64 * 1e-3;
        let (v, _) = contraction_check(&b, t, 2);
        assert!(v.is_finite() && v > prev);
        prev = v;
    }
    let (tiny, ok) = contraction_check(&b, 1e-9, 2);
    assert!(tiny < 1e-6 && ok);
}

#[test]
fn contraction_value_grows_with_lq() {
    // L_Q enters the prefactor and, through v_max-weighted terms and the
    // exponent, the remaining factors; doubling it at least doubles the value.
    let b = data(3.0);
    let mut d = b;
    d.lipschitz.q *= 2.0;
    let (a, _) = contraction_check(&b, 0.05, 2);
    let (c, _) = contraction_check(&d, 0.05, 2);
    assert!(c >= 2.0 * a);
}

#[test]
fn table_defaults_fail_the_condition() {
    let b = BoundsData {
        q_max: 50.0,
        psi_max: 195.0,
        terminal_max: 0.0,
        lambda_max: 2.0,
        j_max: 2.0,
        lipschitz: Lipschitz {
            psi: 40.0,
            q: 10.0,
            terminal: 0.0,
            lambda: 0.0,
        },
    };
    let r = compute_constants(&b, 2.0, 2);
    assert!(!r.contraction_ok);
    assert!(r.contraction_value > 1.0);
    assert_eq!(r, compute_constants(&b, 2.0, 2));
}

#[test]
fn epsilon_table() {
    let b = data(3.0);
    let f = 1.0 - (-4.0f64).exp();
    assert!(rel(epsilon(&b, 2.0, 2), 80.0 * f * f) <= 1e-14);
    assert!((epsilon(&b, 2.0, 2) - 77.096).abs() < 5e-4);
    assert_eq!(epsilon(&b, 2.0, 0), 80.0);
    let rows = epsilon_n(&b, 2.0, &(0..=8).collect::<Vec<_>>());
    for w in rows.windows(2) {
        assert!(w[1].epsilon < w[0].epsilon);
        assert!(rel(w[1].ratio.unwrap(), f) <= 1e-14);
    }
    // max(lambda, 1) switches to 1 for weak shocks.
    let mut weak = b;
    weak.lambda_max = 0.3;
    let g = 1.0 - (-2.0f64).exp();
    assert!(rel(epsilon(&weak, 2.0, 1), 80.0 * g) <= 1e-14);
    for n in 0..6 {
        assert_eq!(value_gap_bound(&b, 2.0, n), epsilon(&b, 2.0, n) / 2.0);
    }
}
