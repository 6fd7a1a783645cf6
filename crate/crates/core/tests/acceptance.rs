//! Acceptance criteria 1-11. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

#![allow(clippy::needless_range_loop, clippy::type_complexity)]

use std::sync::Arc;

use gluing::delaunay_family::{
    check_prop22, first_order_remainder, sample_directions, FamilyParams,
};
use gluing::delaunay_ode::{integrate_orbit, integrate_trajectory, Dimension};
use gluing::harmonics::{build_basis, ModeKey};
use gluing::linearized::{
    picard_interior, profile_norm, q_closed_form, q_quadrature, source_norm, ModeOperators,
    ModeSolution, ParameterBudget, PicardConfig, RadialGrid,
};
use gluing::matching::{
    assemble_match, f_g_coefficients, DataFunctionals, MatchConfig, MatchingState,
};
use gluing::poisson::{
    exterior_extend, interior_extend, z_apply, z_inverse, z_multiplier, BoundaryData,
};
use gluing::spectrum::{degenerate_curvature_set, is_nondegenerate, Family, DEFAULT_KERNEL_TOL};
use gluing::weighted_norms::{norm_weighted, FnField, NormSpec, PowerField};
use gluing::Result;

fn dim(n: usize) -> Dimension {
    Dimension::new(n).unwrap()
}

fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

fn spread(v: &[f64]) -> f64 {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    hi / lo
}

type Outcome = Result<(bool, String)>;

fn c1_hamiltonian() -> Outcome {
    let mut worst: f64 = 0.0;
    for n in 3..=6 {
        for eps in [0.1, 0.3] {
            let o = integrate_orbit(dim(n), eps, 1e-10)?;
            worst = worst.max(o.hamiltonian_drift(10)?);
        }
    }
    Ok((
        worst < 1e-9,
        format!("max relative drift over 10 periods {worst:.3e} (< 1e-9)"),
    ))
}

fn c2_closed_orbits() -> Outcome {
    let mut cyl: f64 = 0.0;
    let mut homo: f64 = 0.0;
    for n in 3..=6 {
        let d = dim(n);
        let c = d.cylinder_value();
        for (_, v, w) in integrate_trajectory(d, c, 0.0, 20.0, 0.05)? {
            cyl = cyl.max((v - c).abs()).max(w.abs());
        }
        let k = (2.0 - n as f64) / 2.0;
        for (t, v, _) in integrate_trajectory(d, 1.0, 0.0, 5.0, 0.05)? {
            homo = homo.max((v - t.cosh().powf(k)).abs());
        }
    }
    Ok((
        cyl < 1e-12 && homo < 1e-5,
        format!(
            "cylinder deviation {cyl:.3e} (< 1e-12), cosh^((2-n)/2) deviation {homo:.3e} (< 1e-5)"
        ),
    ))
}

fn c3_prop22() -> Outcome {
    let mut rows = Vec::new();
    for eps in [0.05, 0.1, 0.2] {
        let o = integrate_orbit(dim(4), eps, 1e-10)?;
        let r = check_prop22(&o, &log_grid(eps * eps, 1.0, 400))?;
        rows.push([r.value_ratio, r.first_ratio, r.second_ratio]);
    }
    let mut ok = true;
    let mut parts = Vec::new();
    for k in 0..3 {
        let col: Vec<f64> = rows.iter().map(|r| r[k]).collect();
        let s = spread(&col);
        ok &= col.iter().all(|x| x.is_finite()) && s < 1.5;
        parts.push(format!(
            "[{:.3e} {:.3e} {:.3e}] max/min {s:.3}",
            col[0], col[1], col[2]
        ));
    }
    Ok((
        ok,
        format!(
            "ratios across eps = 0.05, 0.1, 0.2: {} (< 1.5)",
            parts.join("; ")
        ),
    ))
}

fn c4_remainder_order() -> Outcome {
    let n = 4;
    let o = Arc::new(integrate_orbit(dim(n), 0.1, 1e-10)?);
    let dir = [0.6, 0.8, 0.0, 0.0];
    let sup = |scale: f64| -> Result<f64> {
        let a: Vec<f64> = dir.iter().map(|d| d * scale).collect();
        let p = FamilyParams::from_b(Arc::clone(&o), 0.0, a)?;
        let mut m: f64 = 0.0;
        for r in [0.15, 0.2, 0.25, 0.3, 0.35, 0.4] {
            for d in sample_directions(n) {
                let x: Vec<f64> = d.iter().map(|c| c * r).collect();
                m = m.max(first_order_remainder(&p, &x)?.abs());
            }
        }
        Ok(m)
    };
    let (r1, r2, r3) = (sup(0.2)?, sup(0.1)?, sup(0.05)?);
    let (q1, q2) = (r1 / r2, r2 / r3);
    Ok((
        (3.5..=4.5).contains(&q1) && (3.5..=4.5).contains(&q2),
        format!("sup remainder ratios on halving |a|: {q1:.4} and {q2:.4} (in [3.5, 4.5])"),
    ))
}

fn c5_z_operator() -> Outcome {
    let mut worst: f64 = 0.0;
    let h = 1e-3;
    // one-sided five-point first derivative at s = 1
    let fwd = |f: &dyn Fn(f64) -> Result<f64>| -> Result<f64> {
        Ok(
            (-25.0 * f(1.0)? + 48.0 * f(1.0 + h)? - 36.0 * f(1.0 + 2.0 * h)?
                + 16.0 * f(1.0 + 3.0 * h)?
                - 3.0 * f(1.0 + 4.0 * h)?)
                / (12.0 * h),
        )
    };
    let bwd = |f: &dyn Fn(f64) -> Result<f64>| -> Result<f64> {
        Ok(
            (25.0 * f(1.0)? - 48.0 * f(1.0 - h)? + 36.0 * f(1.0 - 2.0 * h)?
                - 16.0 * f(1.0 - 3.0 * h)?
                + 3.0 * f(1.0 - 4.0 * h)?)
                / (12.0 * h),
        )
    };
    let mut id: f64 = 0.0;
    for n in 3..=5 {
        let d = dim(n);
        let basis = build_basis(d, 4)?;
        let theta: Vec<f64> = {
            let raw: Vec<f64> = (0..n).map(|i| 0.3 + 0.17 * i as f64).collect();
            let s = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
            raw.iter().map(|x| x / s).collect()
        };
        for m in basis.modes().iter().filter(|m| m.degree >= 2) {
            let e = m.eval(&theta);
            if e.abs() < 0.05 {
                continue;
            }
            let data = BoundaryData::new(d, 1.0, vec![(m.key(), 1.0)])?;
            let at = |s: f64| -> Vec<f64> { theta.iter().map(|c| c * s).collect() };
            let dp = bwd(&|s| interior_extend(&data, &basis, &at(s)))?;
            let dq = fwd(&|s| exterior_extend(&data, &basis, &at(s)))?;
            let z = z_multiplier(d, m.degree);
            worst = worst.max(((dp - dq) / e - z).abs() / z);
        }
        let coeffs: Vec<(ModeKey, f64)> = basis
            .modes()
            .iter()
            .filter(|m| m.degree >= 2)
            .enumerate()
            .map(|(j, m)| (m.key(), (1.3 * j as f64 + 0.7).sin()))
            .collect();
        let data = BoundaryData::new(d, 1.0, coeffs)?;
        let back = z_inverse(&z_apply(&data));
        for (k, c) in &data.coefficients {
            id = id.max((back.coefficient(*k) - c).abs());
        }
    }
    Ok((
        worst < 1e-8 && id < 1e-14,
        format!("relative multiplier error {worst:.3e} (< 1e-8), z_inverse o z_apply error {id:.3e} (< 1e-14)"),
    ))
}

/// Sixth-power bump in `t` on `(t0, t1)` with its `t`-derivatives.
fn bump(t: f64, t0: f64, t1: f64) -> (f64, f64, f64) {
    if t <= t0 || t >= t1 {
        return (0.0, 0.0, 0.0);
    }
    let l = t1 - t0;
    let x = (t - t0) / l;
    let u = x * (1.0 - x);
    let du = 1.0 - 2.0 * x;
    (
        4096.0 * u.powi(6),
        4096.0 * 6.0 * u.powi(5) * du / l,
        4096.0 * (30.0 * u.powi(4) * du * du - 12.0 * u.powi(5)) / (l * l),
    )
}

fn c6_mode_bvp() -> Outcome {
    let n = dim(4);
    let budget = ParameterBudget::defaults(n);
    let mu = budget.mu;
    let mut rec: f64 = 0.0;
    let mut ratios = Vec::new();
    for eps in [0.05, 0.1, 0.2] {
        let o = Arc::new(integrate_orbit(n, eps, 1e-10)?);
        let p = FamilyParams::from_b(o, 0.0, vec![0.0; 4])?;
        let r_eps = budget.r_eps(eps);
        let grid = RadialGrid::for_family(&p, r_eps, 3.0, 0.005)?;
        let ops = ModeOperators::new(&p, grid.clone())?;
        let t = grid.t().to_vec();
        let (t0, t1) = (t[0] + 2.0, *t.last().unwrap() - 0.5);
        for degree in 0..=3u32 {
            let mut ex = ModeSolution::zero(grid.len());
            for j in 0..grid.len() {
                let (a, b, c) = bump(t[j], t0, t1);
                ex.w[j] = a;
                ex.rw[j] = b;
                ex.r2w[j] = c - b;
            }
            let f = ops.apply(degree, &ex.w, &ex.rw, &ex.r2w);
            let sol = ops.solve(degree, &f, 1.5)?;
            let mut diff = ModeSolution::zero(grid.len());
            for j in 0..grid.len() {
                diff.w[j] = sol.w[j] - ex.w[j];
                diff.rw[j] = sol.rw[j] - ex.rw[j];
                diff.r2w[j] = sol.r2w[j] - ex.r2w[j];
            }
            rec = rec.max(profile_norm(&grid, &diff, 1.5, 0) / profile_norm(&grid, &ex, 1.5, 0));
        }
        // high-mode inverse norm against sources rho^{mu-2} times a few shapes
        let period = p.orbit().period();
        let mut worst: f64 = 0.0;
        for degree in 2..=3u32 {
            for shape in 0..3 {
                let f: Vec<f64> = (0..grid.len())
                    .map(|j| {
                        let s = match shape {
                            0 => 1.0,
                            1 => (2.0 * std::f64::consts::PI * t[j] / period).cos(),
                            _ => bump(t[j], t[0], *t.last().unwrap()).0 / 4096.0 * 64.0,
                        };
                        grid.rho()[j].powf(mu - 2.0) * s
                    })
                    .collect();
                let sol = ops.solve(degree, &f, mu)?;
                worst = worst.max(profile_norm(&grid, &sol, mu, 0) / source_norm(&grid, &f, mu, 0));
            }
        }
        ratios.push(worst);
    }
    let s = spread(&ratios);
    Ok((
        rec < 1e-6 && s < 2.0,
        format!(
            "manufactured relative error {rec:.3e} (< 1e-6); inverse-norm ratios [{:.4} {:.4} {:.4}] max/min {s:.3} (< 2)",
            ratios[0], ratios[1], ratios[2]
        ),
    ))
}

fn c7_picard() -> Outcome {
    let n = dim(4);
    let eps = 0.1;
    let budget = ParameterBudget::defaults(n);
    let o = Arc::new(integrate_orbit(n, eps, 1e-10)?);
    let p = FamilyParams::from_b(o, 0.0, vec![0.0; 4])?;
    let r_eps = budget.r_eps(eps);
    let bound = r_eps.powf(budget.phi_exponent());
    let phi = BoundaryData::new(n, r_eps, vec![(ModeKey::new(2, 0), 0.02 * bound)])?;
    let rep = picard_interior(&p, &phi, &budget, &PicardConfig::default())?;
    let late = rep
        .contraction
        .iter()
        .skip(1)
        .copied()
        .fold(0.0_f64, f64::max);
    let ok = late < 0.5 && rep.residual < 1e-6 && rep.tau <= budget.tau;
    Ok((
        ok,
        format!(
            "{} iterations, contraction after iteration 2 <= {late:.3e} (< 0.5), residual {:.3e} (< 1e-6), \
             norm {:.4e} = tau {:.4e} x envelope {:.4e} (tau <= {})",
            rep.iterations, rep.residual, rep.norm, rep.tau, rep.envelope, budget.tau
        ),
    ))
}

fn c8_q_closed_forms() -> Outcome {
    let mut worst: f64 = 0.0;
    for v in [-0.9, -0.5, -0.1, -1e-3, 1e-3, 0.05, 0.3, 1.0, 2.5] {
        let q6 = q_quadrature(dim(6), 1.3, v)?.value;
        worst = worst.max((q6 - 6.0 * v * v).abs() / (6.0 * v * v));
        worst = worst.max((q_closed_form(dim(6), 1.3, v)? - 6.0 * v * v).abs() / (6.0 * v * v));
        let e4 = 6.0 * v * v + 2.0 * v * v * v;
        let q4 = q_quadrature(dim(4), 1.0, v)?.value;
        worst = worst.max((q4 - e4).abs() / e4.abs());
        worst = worst.max((q_closed_form(dim(4), 1.0, v)? - e4).abs() / e4.abs());
    }
    Ok((
        worst < 1e-10,
        format!(
            "max relative error of Q = 6v^2 (n=6), 6v^2 + 2v^3 (n=4, u0=1): {worst:.3e} (< 1e-10)"
        ),
    ))
}

fn c9_spectrum() -> Outcome {
    let fam = Family::S2xS2;
    let a = is_nondegenerate(&fam.member(0, 2.0).unwrap(), DEFAULT_KERNEL_TOL)?;
    let b = is_nondegenerate(&fam.member(0, 3.0).unwrap(), DEFAULT_KERNEL_TOL)?;
    let set = degenerate_curvature_set(fam, 10)?;
    let mut set_ok = set.discrepancies.is_empty();
    for factor in 0..2 {
        for i in 1..=10u32 {
            let want = 4.0 / (i * (i + 1)) as f64;
            set_ok &= set
                .values
                .iter()
                .any(|v| v.factor == factor && v.degree == i && (v.curvature - want).abs() < 1e-14);
        }
    }
    let s23 = degenerate_curvature_set(Family::S2xS3, 10)?;
    let disc_ok = !s23.discrepancies.is_empty()
        && s23
            .discrepancies
            .iter()
            .all(|d| (d.derived / d.stated - 1.25).abs() < 1e-12 && d.gap_at_stated > 0.0);
    let ok = a.kernel == vec![vec![1, 0]] && b.nondegenerate && b.gap == 2.0 && set_ok && disc_ok;
    Ok((
        ok,
        format!(
            "S2(2)xS2(4) kernel {:?}; S2(3)xS2(3) gap {}; S2xS2 set 4/(i(i+1)) for i <= 10: {}; S2xS3 stated/derived discrepancies: {} (ratio 5/4)",
            a.kernel,
            b.gap,
            set_ok,
            s23.discrepancies.len()
        ),
    ))
}

fn c10_matching() -> Outcome {
    let n = dim(4);
    let eps = 0.1;
    let o = Arc::new(integrate_orbit(n, eps, 1e-10)?);
    let budget = ParameterBudget::defaults(n);
    let cfg = MatchConfig::default();
    let probe = MatchingState::initial(eps, budget);

    let z = assemble_match(
        Arc::clone(&o),
        &budget,
        &DataFunctionals::zero(&probe)?,
        &cfg,
    )?;
    let s = &z.state;
    let zero_ok = s.b == 0.0
        && s.lambda == eps * eps / 4.0
        && s.a.iter().chain(&s.omega).all(|x| *x == 0.0)
        && s.theta.l2_norm() == 0.0;

    // closed forms of the constant-data systems
    let (h0, d0, hi, di, sc) = (0.01, 0.002, 1e-3, 5e-4, 1e-3);
    let key = ModeKey::new(2, 0);
    let data = BoundaryData::new(n, 1.0, vec![(key, sc)])?;
    let c = assemble_match(
        Arc::clone(&o),
        &budget,
        &DataFunctionals::constant(&probe, (h0, d0), vec![(hi, di); 4], data)?,
        &cfg,
    )?;
    let r = budget.r_eps(eps);
    let b = h0 + d0 / 2.0;
    let lam = eps * eps / (4.0 * (1.0 + b)) + r * r * d0 / 2.0;
    let (f, g) = f_g_coefficients(&FamilyParams::from_b(Arc::clone(&o), b, vec![0.0; 4])?, r)?;
    let a = (di + 3.0 * hi) / ((g + 3.0 * f) * r);
    let w = f * r * a - hi;
    let th = -sc / z_multiplier(n, 2);
    let cs = &c.state;
    let mut err = (cs.b - b)
        .abs()
        .max((cs.lambda - lam).abs())
        .max((cs.theta.coefficient(key) - th).abs());
    for i in 0..4 {
        err = err.max((cs.a[i] - a).abs()).max((cs.omega[i] - w).abs());
    }

    let syn = assemble_match(o, &budget, &DataFunctionals::synthetic(&probe)?, &cfg)?;
    let syn_ok = syn.constraints_hold() && syn.residual < 1e-12;
    Ok((
        zero_ok && err < 1e-12 && syn_ok,
        format!(
            "zero preset exact: {zero_ok}; constant preset closed-form error {err:.3e} (< 1e-12); \
             synthetic: {} sweeps, residual {:.3e}, constraints hold: {}",
            syn.outer_iterations,
            syn.residual.abs(),
            syn.constraints_hold()
        ),
    ))
}

fn c11_norm_scaling() -> Outcome {
    let n = 4;
    let (mu, alpha) = (1.1, 0.5);
    let radii = [0.2, 0.1, 0.05];
    let f = PowerField {
        n,
        coefficient: 1.0,
        power: mu,
    };
    let mut pw = Vec::new();
    for r in radii {
        pw.push(norm_weighted(&f, &NormSpec::new(0, alpha, mu, r))?);
    }
    let s_pow = spread(&pw);
    // w = |x|^mu theta_1 with Laplacian (mu(mu+n-2) - (n-1)) |x|^{mu-2} theta_1
    let nf = n as f64;
    let lap = mu * (mu + nf - 2.0) - (nf - 1.0);
    let mut cs = Vec::new();
    for r in radii {
        let w = FnField::new(n, move |x: &[f64]| {
            let s = x.iter().map(|c| c * c).sum::<f64>().sqrt() / r;
            s.powf(mu - 1.0) * x[0] / r
        });
        let g = FnField::new(n, move |x: &[f64]| {
            let s = x.iter().map(|c| c * c).sum::<f64>().sqrt() / r;
            lap * s.powf(mu - 3.0) * x[0] / r / (r * r)
        });
        let nw = norm_weighted(&w, &NormSpec::new(2, alpha, mu, r))?;
        let ng = norm_weighted(&g, &NormSpec::new(0, alpha, mu - 2.0, r))?;
        cs.push(nw / ng);
    }
    let s_c = spread(&cs);
    Ok((
        s_pow < 1.01 && s_c < 2.0,
        format!(
            "||r^mu|| max/min {s_pow:.6} (< 1.01); rescaling constants [{:.4} {:.4} {:.4}] max/min {s_c:.4} (< 2)",
            cs[0], cs[1], cs[2]
        ),
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("hamiltonian conservation", c1_hamiltonian),
        ("closed-form orbits", c2_closed_orbits),
        ("leading-term scaling", c3_prop22),
        ("translation remainder order", c4_remainder_order),
        ("Z operator", c5_z_operator),
        ("mode BVP", c6_mode_bvp),
        ("interior Picard", c7_picard),
        ("Q closed forms", c8_q_closed_forms),
        ("product-sphere spectrum", c9_spectrum),
        ("matching", c10_matching),
        ("norm scaling", c11_norm_scaling),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let start = std::time::Instant::now();
        let (ok, detail) = match f() {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "{} {:>2} {name}: {detail} [{:.1}s]",
            if ok { "PASS" } else { "FAIL" },
            k + 1,
            start.elapsed().as_secs_f64()
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
