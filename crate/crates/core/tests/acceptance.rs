//! Acceptance run: one PASS/FAIL line per criterion; exits non-zero if any fails.

mod common;

use std::cell::Cell;
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relbelief::classify::{error_sum, map_rule, rb_rule, risk_table, TwoClassSpec};
use relbelief::decision::{
    bayes_rule, eta_ladder, exhaustive_minimum, lpl_region, make_loss, prior_risk, unbiasedness_gap, DecisionRule,
    LossKind,
};
use relbelief::evidence::{credible_region, rb_estimate, rb_table, Convention, EvidenceTable};
use relbelief::grid::{build_grid, Family, Grid1D};
use relbelief::limits::{
    eta_limit_model, finite_eta_ladder, geometric_model, region_limit, reparameterization_demo, GeometricSpec,
    GridProblem, Likelihood,
};
use relbelief::model::{psi_posterior, psi_prior, FiniteModel, PsiMap};
use relbelief::regress::{functional_inference, posterior_params, rb_grid_check, RegressionSpec};

const RANDOM_MODELS: usize = 1000;
const MODEL_SEED: u64 = 20_240_611;

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

thread_local! {
    static TABLES: Cell<(usize, f64)> = const { Cell::new((0, 0.0)) };
}

/// Builds a table and records its normalization error.
fn table(prior: &[f64], posterior: &[f64]) -> EvidenceTable {
    let t = rb_table(prior, posterior, None).expect("valid table");
    let dev = (t.normalization() - 1.0).abs();
    TABLES.with(|c| {
        let (n, worst) = c.get();
        c.set((n + 1, worst.max(dev)));
    });
    t
}

fn psi_tables(model: &FiniteModel, psi: &PsiMap, x: usize) -> (Vec<f64>, Vec<f64>, EvidenceTable) {
    let prior = psi_prior(model, psi).unwrap();
    let post = psi_posterior(model, psi, x).unwrap();
    let t = table(&prior, &post);
    (prior, post, t)
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn risk_table_sums() -> Outcome {
    let start = Instant::now();
    let rows = risk_table(1.0, &[1.0, 14.0, 32.0, 100.0], 1.0, 10, 200_000, 7).map_err(|e| e.to_string())?;
    // (beta, map_sum, map_tol, rb_sum, rb_tol)
    let expected = [
        (1.0, 0.776, 0.02, 0.776, 0.02),
        (14.0, 0.977, 0.015, 0.665, 0.02),
        (32.0, 0.997, 0.01, 0.641, 0.02),
        (100.0, 1.000, 0.005, 0.624, 0.02),
    ];
    let mut summary = Vec::new();
    for (row, &(beta, map, map_tol, rb, rb_tol)) in rows.iter().zip(&expected) {
        check(row.beta == beta, || format!("unexpected beta {}", row.beta))?;
        check((row.map_sum - map).abs() <= map_tol, || {
            format!("beta={beta}: map_sum {} vs {map}", row.map_sum)
        })?;
        check((row.rb_sum - rb).abs() <= rb_tol, || {
            format!("beta={beta}: rb_sum {} vs {rb}", row.rb_sum)
        })?;
        summary.push(format!("{beta}:{:.3}/{:.3}", row.map_sum, row.rb_sum));
    }
    let secs = start.elapsed().as_secs_f64();
    check(secs <= 120.0, || format!("took {secs:.1}s"))?;
    Ok(format!("map/rb sums {} in {secs:.2}s", summary.join(" ")))
}

fn example1() -> Outcome {
    let spec = TwoClassSpec::new(0.05, 0.80, 0.01).map_err(|e| e.to_string())?;
    let rb = rb_rule(&spec).unwrap();
    let map = map_rule(&spec).unwrap();
    check(rb == [0, 1], || format!("RB labels {rb:?}"))?;
    let rb_sum = error_sum(&spec, rb).unwrap().sum;
    let map_sum = error_sum(&spec, map).unwrap().sum;
    check((rb_sum - 0.25).abs() <= 1e-15, || format!("RB error sum {rb_sum}"))?;
    check(map_sum == 1.0, || format!("MAP error sum {map_sum}"))?;
    Ok(format!(
        "RB sum {rb_sum}, MAP sum {map_sum}, RB labels x=0->psi0 x=1->psi1"
    ))
}

fn oracle_equivalence(models: &[(FiniteModel, PsiMap)]) -> Outcome {
    let mut worst = 0.0f64;
    let mut rules = 0u64;
    for (i, (model, psi)) in models.iter().enumerate() {
        let prior = psi_prior(model, psi).unwrap();
        let loss = make_loss(LossKind::Rb, &prior, None).unwrap();
        let (rule, _) = bayes_rule(model, psi, &loss).unwrap();
        let risk = prior_risk(model, psi, &loss, &rule).unwrap().direct;
        let ex = exhaustive_minimum(model, psi, &loss).unwrap();
        rules += ex.rules_checked;
        worst = worst.max((risk - ex.best_risk).abs());
        check((risk - ex.best_risk).abs() <= 1e-12, || {
            format!("model {i}: risk {risk} vs exhaustive {}", ex.best_risk)
        })?;
        for x in 0..model.n_x() {
            let (_, _, t) = psi_tables(model, psi, x);
            let est = t.source[rb_estimate(&t).index];
            check(rule.actions[x] == est, || {
                format!("model {i}, x={x}: rule {} vs estimate {est}", rule.actions[x])
            })?;
        }
    }
    Ok(format!(
        "{} models, {rules} rules enumerated, max risk gap {worst:.1e}",
        models.len()
    ))
}

fn eta_threshold(models: &[(FiniteModel, PsiMap)]) -> Outcome {
    let (geo, geo_psi, _) = geometric_model(&GeometricSpec::default()).map_err(|e| e.to_string())?;
    let ladder = eta_ladder(geo.prior(), 48);
    let mut checked = 0;
    for x in 0..geo.n_x() {
        psi_tables(&geo, &geo_psi, x);
        let t = eta_limit_model(&geo, &geo_psi, x, &ladder).map_err(|e| format!("geometric x={x}: {e}"))?;
        check(t.violations.is_empty(), || {
            format!("geometric x={x}: violations at {:?}", t.violations)
        })?;
        checked += t.trace.rows.iter().filter(|r| r.parameter <= t.threshold).count();
    }
    for (i, (model, psi)) in models.iter().enumerate() {
        let prior = psi_prior(model, psi).unwrap();
        let ladder = finite_eta_ladder(&prior);
        for x in 0..model.n_x() {
            let t = eta_limit_model(model, psi, x, &ladder).map_err(|e| format!("model {i}, x={x}: {e}"))?;
            check(t.violations.is_empty(), || {
                format!("model {i}, x={x}: violations at {:?}", t.violations)
            })?;
            checked += t.trace.rows.iter().filter(|r| r.parameter <= t.threshold).count();
        }
    }
    Ok(format!(
        "{checked} (observation, eta) pairs below threshold, no exception"
    ))
}

fn rb_rule_of(model: &FiniteModel, psi: &PsiMap) -> DecisionRule {
    let actions = (0..model.n_x())
        .map(|x| {
            let (_, _, t) = psi_tables(model, psi, x);
            t.source[rb_estimate(&t).index]
        })
        .collect();
    DecisionRule::from_actions(actions)
}

fn unbiasedness(models: &[(FiniteModel, PsiMap)]) -> Outcome {
    let mut worst = f64::INFINITY;
    let mut evaluated = 0;
    for (i, (model, psi)) in models.iter().enumerate() {
        let prior = psi_prior(model, psi).unwrap();
        let rule = rb_rule_of(model, psi);
        let mut hs = vec![vec![1.0; prior.len()]];
        for eta in finite_eta_ladder(&prior) {
            hs.push(prior.iter().map(|p| (1.0 / p).min(1.0 / eta)).collect());
        }
        for h in &hs {
            let gap = unbiasedness_gap(model, psi, h, &rule).unwrap();
            worst = worst.min(gap);
            evaluated += 1;
            check(gap >= -1e-12, || format!("model {i}: gap {gap} with h={h:?}"))?;
        }
    }
    Ok(format!("{evaluated} (model, h) pairs, smallest gap {worst:.3e}"))
}

fn region_identity(models: &[(FiniteModel, PsiMap)]) -> Outcome {
    let mut regions = 0;
    for (i, (model, psi)) in models.iter().enumerate() {
        for x in 0..model.n_x() {
            let (prior, post, t) = psi_tables(model, psi, x);
            let loss = make_loss(LossKind::Rb, &prior, None).unwrap();
            // Attainable contents: cumulative posterior over distinct RB levels.
            let mut order: Vec<usize> = (0..t.len()).collect();
            order.sort_by(|&a, &b| t.rb[b].total_cmp(&t.rb[a]));
            let mut gammas = vec![0.0];
            let mut cum = 0.0;
            for (k, &j) in order.iter().enumerate() {
                cum += t.posterior[j];
                if k + 1 == order.len() || t.rb[order[k + 1]] != t.rb[j] {
                    gammas.push(cum.min(1.0));
                }
            }
            for &gamma in &gammas {
                let c = credible_region(&t, gamma, Convention::SupGeq).unwrap();
                let d = lpl_region(&loss, &post, gamma).unwrap();
                let mut cm: Vec<usize> = c.members.iter().map(|&m| t.source[m]).collect();
                let mut dm = d.members.clone();
                cm.sort_unstable();
                dm.sort_unstable();
                check(cm == dm, || {
                    format!("model {i}, x={x}, gamma={gamma}: {cm:?} vs {dm:?}")
                })?;
                regions += 1;
            }
        }
    }
    Ok(format!("{regions} region pairs identical"))
}

fn region_convergence() -> Outcome {
    let problem = GridProblem {
        prior: Family::Normal {
            mean: 0.0,
            variance: 1.0,
        },
        likelihood: Likelihood::Normal { x: 1.5, variance: 1.0 },
    };
    let grids: Vec<Grid1D> = [512, 1024, 2048, 4096]
        .iter()
        .map(|&n| build_grid(-6.0, 6.0, n).unwrap())
        .collect();
    for g in &grids {
        let cells = problem.tables(g).unwrap();
        table(&cells.prior, &cells.posterior);
    }
    let trace = region_limit(&problem, 0.95, &grids).map_err(|e| e.to_string())?;
    let d: Vec<f64> = trace.rows.iter().map(|r| r.discrepancy).collect();
    let shown = d.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>().join(", ");
    let last = *d.last().unwrap();
    check(last < 0.01, || format!("discrepancy {last} at 4096 cells"))?;
    check(d.windows(2).all(|w| w[1] <= w[0]), || {
        format!("increasing discrepancy [{shown}]")
    })?;
    check(d.windows(2).all(|w| w[1] <= 0.75 * w[0]), || {
        format!("< 0.01 and non-increasing hold, but a successive ratio exceeds 0.75: [{shown}]")
    })?;
    Ok(format!("discrepancies [{shown}]"))
}

fn random_spec(rng: &mut ChaCha8Rng) -> (RegressionSpec, DVector<f64>) {
    let k = rng.random_range(1..=4);
    let n = rng.random_range(k + 2..=12);
    let x = DMatrix::from_fn(n, k, |_, _| rng.random_range(-2.0..2.0));
    let beta = DVector::from_fn(k, |_, _| rng.random_range(-1.5..1.5));
    let sigma2: f64 = rng.random_range(0.2..2.0);
    let noise = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0) * sigma2.sqrt());
    let y = &x * &beta + noise;
    let tau2 = rng.random_range(0.5..4.0);
    let w = DVector::from_fn(k, |_, _| rng.random_range(-1.0..1.0));
    (RegressionSpec::new(x, y, sigma2, tau2).unwrap(), w)
}

fn regression() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut worst_orth = 0.0f64;
    for _ in 0..20 {
        let (spec, w) = random_spec(&mut rng);
        let q = spec.design.clone().qr().q();
        let orth = RegressionSpec::new(q, spec.response.clone(), spec.sigma2, spec.tau2).unwrap();
        let b = posterior_params(&orth).unwrap().mle;
        let f = functional_inference(&orth, &w).unwrap();
        let plug_in = w.dot(&b);
        worst_orth = worst_orth.max((f.psi_rb - plug_in).abs());
        check((f.psi_rb - plug_in).abs() <= 1e-10, || {
            format!("orthonormal: {} vs w'b {plug_in}", f.psi_rb)
        })?;
    }
    let mut worst_cells = 0.0f64;
    let mut worst_factor = 0.0f64;
    for i in 0..20 {
        let (spec, w) = random_spec(&mut rng);
        let f = functional_inference(&spec, &w).unwrap();
        let reach = 6.0 * f.sigma2_psi.sqrt() * (1.0 + 1e-9);
        let grid = build_grid(-reach, reach, 1 << 16).unwrap();
        let g = rb_grid_check(&spec, &w, &grid).map_err(|e| format!("spec {i}: {e}"))?;
        worst_cells = worst_cells.max(g.gap / g.cell_width);
        check(g.gap <= g.cell_width, || {
            format!("spec {i}: gap {} > cell {}", g.gap, g.cell_width)
        })?;
        let factor = 1.0 + spec.sigma2 / (spec.tau2 * w.dot(&w));
        let rel = (f.z_rb / f.psi_rb - factor).abs() / factor;
        worst_factor = worst_factor.max(rel);
        check(rel <= 1e-10, || {
            format!("spec {i}: z/psi {} vs {factor}", f.z_rb / f.psi_rb)
        })?;
    }
    Ok(format!(
        "orthonormal gap {worst_orth:.1e}, grid gap {worst_cells:.2} cells, z/psi rel err {worst_factor:.1e}"
    ))
}

fn normalization() -> Outcome {
    let (count, worst) = TABLES.with(|c| c.get());
    check(count > 0, || "no tables recorded".into())?;
    check(worst <= 1e-9, || {
        format!("worst |sum rb*prior - 1| = {worst:e} over {count} tables")
    })?;
    Ok(format!("{count} tables, worst deviation {worst:.1e}"))
}

fn invariance() -> Outcome {
    let grid = build_grid(-6.0, 6.0, 4096).unwrap();
    let r = reparameterization_demo(&grid, (0.0, 1.0), (0.75, 0.5)).map_err(|e| e.to_string())?;
    check(r.rb_cell_psi == r.rb_cell_tau, || {
        format!("RB cells differ: {} vs {}", r.rb_cell_psi, r.rb_cell_tau)
    })?;
    check(r.map_shift_cells > 10, || {
        format!("MAP moved only {} cells", r.map_shift_cells)
    })?;
    Ok(format!(
        "RB cell {} in both scales, MAP moved {} cells",
        r.rb_cell_psi, r.map_shift_cells
    ))
}

fn main() -> ExitCode {
    let models = common::models(RANDOM_MODELS, MODEL_SEED);
    let criteria: Vec<Criterion> = vec![
        ("predictive risk table", Box::new(risk_table_sums)),
        ("two-class exact error sums", Box::new(example1)),
        (
            "RB loss Bayes rule vs exhaustive search",
            Box::new(|| oracle_equivalence(&models)),
        ),
        ("bounded loss eta threshold", Box::new(|| eta_threshold(&models))),
        ("Bayesian unbiasedness", Box::new(|| unbiasedness(&models))),
        (
            "lowest posterior loss = credible region",
            Box::new(|| region_identity(&models)),
        ),
        ("credible region convergence", Box::new(region_convergence)),
        ("regression closed forms", Box::new(regression)),
        ("evidence normalization", Box::new(normalization)),
        ("reparameterization invariance", Box::new(invariance)),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("criterion {:>2} PASS {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
