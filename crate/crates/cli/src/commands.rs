//! One function per subcommand. Each returns the process exit code.

use std::sync::Arc;

use gluing::delaunay_family::{check_prop22, u_eps_radial, FamilyParams};
use gluing::delaunay_ode::{hamiltonian, integrate_orbit, DelaunayOrbit};
use gluing::harmonics::ModeKey;
use gluing::linearized::{picard_interior, PicardConfig};
use gluing::matching::{assemble_match, DataFunctionals, MatchConfig, MatchingState, ScalarFn};
use gluing::poisson::BoundaryData;
use gluing::spectrum::{
    degenerate_curvature_set, is_nondegenerate, linearized_spectrum, Family, DEFAULT_KERNEL_TOL,
};
use gluing::weighted_norms::{norm_weighted, NormSpec, PowerField};

use crate::config::RunConfig;
use crate::output::{fmt, svg, write_file, Csv};
use crate::CliError;

const ORBIT_TOL: f64 = 1e-10;

fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

fn orbit(cfg: &RunConfig, eps: f64) -> Result<DelaunayOrbit, CliError> {
    Ok(integrate_orbit(
        cfg.dimension()?,
        eps,
        cfg.tol.unwrap_or(ORBIT_TOL),
    )?)
}

/// File name, suffixed by the epsilon index when several are swept.
fn name(stem: &str, k: usize, total: usize) -> String {
    if total == 1 {
        format!("{stem}.csv")
    } else {
        format!("{stem}_{k}.csv")
    }
}

pub fn delaunay(cfg: &RunConfig, verify_prop22: bool, plot: bool) -> Result<i32, CliError> {
    let n = cfg.dimension()?;
    let total = cfg.eps.len();
    let results: Vec<Result<DelaunayOrbit, CliError>> = std::thread::scope(|sc| {
        let handles: Vec<_> = cfg
            .eps
            .iter()
            .map(|&e| sc.spawn(move || orbit(cfg, e)))
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| Err(CliError::Solver("worker panicked".into())))
            })
            .collect()
    });
    for (k, res) in results.into_iter().enumerate() {
        let orbit = res?;
        let eps = orbit.epsilon();
        let mut prof = Csv::new(&["t", "v", "w", "H"]);
        let mut vt = Vec::new();
        for (t, v, w) in orbit.samples() {
            prof.floats(&[t, v, w, hamiltonian(n, v, w)?]);
            vt.push((t, v));
        }
        prof.write(&cfg.out, &name("delaunay_profile", k, total))?;
        let mut up = Csv::new(&["r", "u", "ru_r", "r2u_rr"]);
        let radii = log_grid(eps * eps, 1.0, 200);
        for &r in &radii {
            let (u, ru, rru) = u_eps_radial(&orbit, r)?;
            up.floats(&[r, u, ru, rru]);
        }
        up.write(&cfg.out, &name("uprofile", k, total))?;
        println!(
            "n = {} eps = {} period = {} H = {} drift(10 periods) = {:.3e}",
            n.get(),
            fmt(eps),
            fmt(orbit.period()),
            fmt(orbit.h0()),
            orbit.hamiltonian_drift(10)?
        );
        if verify_prop22 {
            let rep = check_prop22(&orbit, &radii)?;
            println!(
                "leading-term ratios on [eps^2, 1]: value {:.4e} first {:.4e} second {:.4e} max {:.4e}",
                rep.value_ratio,
                rep.first_ratio,
                rep.second_ratio,
                rep.max_ratio()
            );
            if !rep.max_ratio().is_finite() {
                return Ok(1);
            }
        }
        if plot {
            let stem = if total == 1 {
                "delaunay_profile".to_string()
            } else {
                format!("delaunay_profile_{k}")
            };
            write_file(
                &cfg.out,
                &format!("{stem}.svg"),
                &svg(&format!("v(t), eps = {eps}"), &[("v", vt)]),
            )?;
        }
    }
    Ok(0)
}

pub struct SpectrumArgs {
    pub family: String,
    pub k: f64,
    pub factor: usize,
    pub count: usize,
    pub i_max: Option<u32>,
}

fn tuple(ix: &[u32]) -> String {
    let s: Vec<String> = ix.iter().map(|i| i.to_string()).collect();
    format!("({})", s.join(","))
}

pub fn spectrum(cfg: &RunConfig, a: &SpectrumArgs) -> Result<i32, CliError> {
    let family = Family::parse(&a.family)?;
    if a.factor > 1 {
        return Err(CliError::Param(format!(
            "factor {} outside 0..=1",
            a.factor
        )));
    }
    let spec = family.member(a.factor, a.k).ok_or_else(|| {
        CliError::Param(format!(
            "curvature {} on factor {} leaves no positive curvature for the other factor",
            a.k, a.factor
        ))
    })?;
    let tol = cfg.tol.unwrap_or(DEFAULT_KERNEL_TOL);
    let nd = is_nondegenerate(&spec, tol)?;
    let sp = linearized_spectrum(&spec, a.count)?;
    let mut csv = Csv::new(&["eigenvalue", "laplace", "i1", "i2"]);
    let dim = spec.dimension() as f64;
    for s in &sp {
        let mut cells = vec![fmt(s.value), fmt(dim - s.value)];
        cells.extend(s.index.iter().map(|i| i.to_string()));
        csv.row(&cells);
    }
    csv.write(&cfg.out, "spectrum.csv")?;
    let curv: Vec<String> = spec
        .factors
        .iter()
        .map(|(m, k)| format!("S^{m}({k})"))
        .collect();
    if nd.nondegenerate {
        println!("{}: NONDEGENERATE gap {}", curv.join(" x "), fmt(nd.gap));
    } else {
        let ks: Vec<String> = nd.kernel.iter().map(|k| tuple(k)).collect();
        println!("{}: DEGENERATE kernel {}", curv.join(" x "), ks.join(" "));
    }
    if let Some(i_max) = a.i_max {
        let set = degenerate_curvature_set(family, i_max)?;
        for v in &set.values {
            println!(
                "degenerate: factor {} degree {} curvature {}",
                v.factor,
                v.degree,
                fmt(v.curvature)
            );
        }
        for d in &set.discrepancies {
            println!(
                "discrepancy: factor {} degree {} stated {} derived {} gap at stated {}",
                d.factor,
                d.degree,
                fmt(d.stated),
                fmt(d.derived),
                fmt(d.gap_at_stated)
            );
        }
    }
    Ok(0)
}

pub fn matching(cfg: &RunConfig, preset: &str, scale: f64, h0_scale: f64) -> Result<i32, CliError> {
    let n = cfg.dimension()?;
    let eps = cfg.eps[0];
    let orbit = Arc::new(integrate_orbit(n, eps, ORBIT_TOL)?);
    let budget = cfg.budget()?;
    let probe = MatchingState::initial(eps, budget);
    let mut funcs = DataFunctionals::preset(preset, Arc::clone(&orbit), &probe)?;
    if scale != 1.0 {
        funcs = funcs.scaled(scale);
    }
    if h0_scale != 1.0 {
        let h0 = Arc::clone(&funcs.h0);
        funcs.h0 =
            Arc::new(move |st: &MatchingState| h0(st).map(|(a, b)| (h0_scale * a, h0_scale * b)))
                as ScalarFn;
    }
    funcs.check_magnitudes(&probe)?;
    let tol = cfg.tol.unwrap_or(1e-12);
    let mcfg = MatchConfig {
        seed: cfg.seed,
        ..MatchConfig::default()
    };
    let rep = assemble_match(orbit, &budget, &funcs, &mcfg)?;
    let mut csv = Csv::new(&[
        "iteration",
        "b",
        "lambda",
        "a",
        "omega",
        "theta",
        "residual",
    ]);
    for (k, (st, inc)) in rep.history.iter().zip(&rep.outer_increments).enumerate() {
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        csv.row(&[
            (k + 1).to_string(),
            fmt(st.b),
            fmt(st.lambda),
            fmt(norm(&st.a)),
            fmt(norm(&st.omega)),
            fmt(st.theta.l2_norm()),
            fmt(*inc),
        ]);
    }
    csv.write(&cfg.out, "match.csv")?;
    let st = &rep.state;
    println!(
        "preset {} n = {} eps = {}: b = {} lambda = {} outer sweeps = {} joint residual = {:.3e}",
        funcs.name,
        n.get(),
        fmt(eps),
        fmt(st.b),
        fmt(st.lambda),
        rep.outer_iterations,
        rep.residual.abs()
    );
    for c in &rep.constraints {
        println!(
            "  {} = {:.4e} <= {:.4e} {}",
            c.name,
            c.value,
            c.limit,
            if c.holds() { "ok" } else { "VIOLATED" }
        );
    }
    Ok(if rep.residual < tol && rep.constraints_hold() {
        0
    } else {
        1
    })
}

pub struct InteriorArgs {
    pub coef: f64,
    pub degree: u32,
    pub index: usize,
    pub a: Vec<f64>,
    pub periods: Option<f64>,
}

pub fn interior(cfg: &RunConfig, a: &InteriorArgs, plot: bool) -> Result<i32, CliError> {
    let n = cfg.dimension()?;
    let eps = cfg.eps[0];
    let budget = cfg.budget()?;
    let orbit = Arc::new(integrate_orbit(n, eps, ORBIT_TOL)?);
    let shift = if a.a.is_empty() {
        vec![0.0; n.get()]
    } else {
        a.a.clone()
    };
    let params = FamilyParams::from_b(orbit, 0.0, shift)?;
    let bound = budget.r_eps(eps).powf(budget.phi_exponent());
    let phi = BoundaryData::new(
        n,
        budget.r_eps(eps),
        vec![(ModeKey::new(a.degree, a.index), a.coef * bound)],
    )?;
    let mut pc = PicardConfig {
        seed: cfg.seed,
        ..PicardConfig::default()
    };
    if let Some(p) = a.periods {
        pc.periods = p;
    }
    if let Some(h) = cfg.step {
        pc.step = h;
    }
    if let Some(t) = cfg.tol {
        pc.tol = t;
    }
    let rep = picard_interior(&params, &phi, &budget, &pc)?;
    let mut csv = Csv::new(&["iteration", "increment", "residual"]);
    csv.floats(&[0.0, 0.0, rep.residuals[0]]);
    for (k, inc) in rep.increments.iter().enumerate() {
        csv.row(&[
            (k + 1).to_string(),
            fmt(*inc),
            fmt(rep.residuals.get(k + 1).copied().unwrap_or(f64::NAN)),
        ]);
    }
    csv.write(&cfg.out, "interior.csv")?;
    println!(
        "iterations {} residual {:.3e} background {:.3e} aliasing {:.3e} norm {:.4e} envelope {:.4e} tau {:.4e} c3 {:.6} phi {:.4e} <= {:.4e}",
        rep.iterations,
        rep.residual,
        rep.background_residual,
        rep.aliasing,
        rep.norm,
        rep.envelope,
        rep.tau,
        rep.c3,
        rep.phi_norm,
        rep.phi_bound
    );
    if let Some(f) = rep.neumann_factor {
        println!("neumann factor {f:.3e}");
    }
    if plot {
        let rho = rep.grid.rho();
        let series: Vec<(String, Vec<(f64, f64)>)> = rep
            .solution
            .keys()
            .iter()
            .zip(rep.solution.profiles())
            .filter(|(_, p)| p.iter().any(|x| *x != 0.0))
            .map(|(k, p)| {
                (
                    format!("({},{})", k.degree, k.index),
                    rho.iter().copied().zip(p.iter().copied()).collect(),
                )
            })
            .collect();
        let refs: Vec<(&str, Vec<(f64, f64)>)> = series
            .iter()
            .map(|(s, v)| (s.as_str(), v.clone()))
            .collect();
        write_file(
            &cfg.out,
            "interior.svg",
            &svg("correction modes against rho", &refs),
        )?;
    }
    Ok(0)
}

pub struct NormArgs {
    pub mu: f64,
    pub k: usize,
    pub alpha: f64,
    pub radii: Vec<f64>,
}

pub fn norms(cfg: &RunConfig, a: &NormArgs) -> Result<i32, CliError> {
    let n = cfg.dimension()?.get();
    let f = PowerField {
        n,
        coefficient: 1.0,
        power: a.mu,
    };
    let mut csv = Csv::new(&["r", "norm"]);
    let mut vals = Vec::new();
    for &r in &a.radii {
        let mut spec = NormSpec::new(a.k, a.alpha, a.mu, r);
        spec.seed = cfg.seed;
        let v = norm_weighted(&f, &spec)?;
        csv.floats(&[r, v]);
        vals.push(v);
    }
    csv.write(&cfg.out, "norms.csv")?;
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    println!(
        "||r^mu|| over {} radii: min {} max {} spread {:.3e}",
        vals.len(),
        fmt(lo),
        fmt(hi),
        hi / lo - 1.0
    );
    Ok(0)
}
