//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use recycle_core::bilevel::{hypergradient, lower_solve, upper_cost, HessianSequence, HessianSolveConfig, LowerOptions};
use recycle_core::dense::materialize_jacobian;
use recycle_core::krylov::{
    cg, flops_minres, flops_rminres, minres, minres_observed, rminres, rminres_observed, SolveOptions,
};
use recycle_core::operators::{DenseJacobian, DenseOperator, ImageShape, SymmetricOperator};
use recycle_core::recycling::{gsvd_pair, prepare_recycle, rgen_select, RecycleSpace, Side, SizeSel, StrategyDescriptor};
use recycle_core::stopping::StopRule;
use recycle_lab::image::GrayImage;
use recycle_lab::similarity::similarity_report;
use recycle_lab::{
    compute_references, make_inpainting, record_sequence, replay, ReplayConfig, ReplayReport, RunConfig,
    SequenceRecord, StopChoice, REFERENCE_TOL,
};

type Outcome = Result<String, String>;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_vec(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| r.random_range(-1.0..1.0)).collect()
}

fn random_matrix(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| r.random_range(-1.0..1.0))
}

fn random_orthonormal(r: &mut ChaCha8Rng, n: usize, t: usize) -> DMatrix<f64> {
    random_matrix(r, n, t).qr().q()
}

/// Eigenvalues log-uniform in `[0.1, 10]`.
fn random_spd(r: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let q = random_orthonormal(r, n, n);
    let eig = DVector::from_fn(n, |_, _| 10f64.powf(r.random_range(-1.0..1.0)));
    let m = &q * DMatrix::from_diagonal(&eig) * q.transpose();
    (&m + m.transpose()) * 0.5
}

fn random_space(r: &mut ChaCha8Rng, h: &DMatrix<f64>, s: usize) -> RecycleSpace {
    prepare_recycle(&DenseOperator::new(h.clone()), &random_matrix(r, h.nrows(), s)).unwrap()
}

fn dv(x: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(x)
}

fn rel(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn solver_correctness() -> Outcome {
    let start = Instant::now();
    let mut r = rng(1);
    let (mut worst, mut worst_iterate) = (0.0f64, 0.0f64);
    for _ in 0..50 {
        let n = r.random_range(10..=40);
        let hm = random_spd(&mut r, n);
        let g = random_vec(&mut r, n);
        let s = r.random_range(1..=5);
        let space = random_space(&mut r, &hm, s);
        let h = DenseOperator::new(hm.clone());
        let exact = hm.clone().cholesky().unwrap().solve(&dv(&g));
        let opts = SolveOptions::new(StopRule::residual(1e-10)).with_max_iter(10 * n);
        for w in [
            minres(&h, &g, &opts).unwrap().solution,
            cg(&h, &g, &opts).unwrap().solution,
            rminres(&h, &g, &space, &opts).unwrap().solution,
        ] {
            worst = worst.max(rel(&dv(&w), &exact));
        }
        let (mut a, mut b) = (Vec::new(), Vec::new());
        minres_observed(&h, &g, &opts, &mut |v| a.push(v.solution.to_vec())).unwrap();
        rminres_observed(&h, &g, &RecycleSpace::empty(n), &opts, &mut |v| b.push(v.solution.to_vec())).unwrap();
        if a.len() != b.len() {
            return Err(format!("s = 0 took {} iterates, MINRES {}", b.len(), a.len()));
        }
        for (x, y) in a.iter().zip(&b) {
            let scale = dv(x).norm().max(1e-300);
            worst_iterate = worst_iterate.max((dv(x) - dv(y)).norm() / scale);
        }
    }
    let elapsed = start.elapsed();
    check(
        worst <= 1e-8 && worst_iterate <= 1e-12 && elapsed < Duration::from_secs(10),
        format!("max rel error {worst:.1e}, s=0 iterate gap {worst_iterate:.1e}, {elapsed:.2?}"),
    )
}

fn rminres_optimality() -> Outcome {
    let mut r = rng(2);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let n = r.random_range(15..=40);
        let hm = random_spd(&mut r, n);
        let g = random_vec(&mut r, n);
        let space = random_space(&mut r, &hm, 3);
        let k = r.random_range(1..=12);
        let opts = SolveOptions::new(StopRule::residual(1e-300)).with_basis().with_max_iter(k);
        let res = rminres(&DenseOperator::new(hm.clone()), &g, &space, &opts).unwrap();
        let v = res.basis.as_ref().unwrap();
        let kk = v.ncols();
        let mut z = DMatrix::zeros(n, kk + space.size());
        z.columns_mut(0, kk).copy_from(v);
        z.columns_mut(kk, space.size()).copy_from(&space.u);
        let hz = &hm * &z;
        let coef = hz.clone().svd(true, true).solve(&dv(&g), 1e-14).unwrap();
        let best = (dv(&g) - &hz * coef).norm();
        worst = worst.max((res.final_residual_norm() - best).abs() / best.max(1e-300));
    }
    check(worst <= 1e-6, format!("max rel gap to least-squares minimizer {worst:.1e}"))
}

fn residual_recurrence() -> Outcome {
    let mut r = rng(3);
    let mut worst = 0.0f64;
    let mut checked = 0;
    for _ in 0..20 {
        let n = r.random_range(15..=40);
        let hm = random_spd(&mut r, n);
        let g = random_vec(&mut r, n);
        let w0 = random_vec(&mut r, n);
        let s = r.random_range(1..=5);
        let space = random_space(&mut r, &hm, s);
        let gn = dv(&g).norm();
        let opts = SolveOptions::new(StopRule::residual(1e-10))
            .with_residual_vector()
            .with_initial_guess(&w0)
            .with_max_iter(4 * n);
        rminres_observed(&DenseOperator::new(hm.clone()), &g, &space, &opts, &mut |v| {
            let explicit = dv(&g) - &hm * dv(v.solution);
            let tracked = dv(v.residual.expect("tracked"));
            worst = worst.max((explicit - tracked).norm() / gn);
            checked += 1;
        })
        .unwrap();
    }
    check(worst <= 1e-8, format!("max |r_k - (g - H w_k)| / |g| = {worst:.1e} over {checked} iterates"))
}

fn flop_identity() -> Outcome {
    let mut r = rng(4);
    for _ in 0..10 {
        let n = r.random_range(10..=40);
        let hm = random_spd(&mut r, n);
        let g = random_vec(&mut r, n);
        let h = DenseOperator::new(hm.clone());
        let hc = h.apply_cost() as i64;
        let opts = SolveOptions::new(StopRule::residual(1e-9)).with_max_iter(4 * n);
        let a = minres(&h, &g, &opts).unwrap();
        let want = flops_minres(a.iterations as i64, n as i64, hc).unwrap();
        if a.flops != want {
            return Err(format!("minres counted {} expected {want}", a.flops));
        }
        let s = r.random_range(1..=6);
        let space = random_space(&mut r, &hm, s);
        let b = rminres(&h, &g, &space, &opts).unwrap();
        let want = flops_rminres(b.iterations as i64, n as i64, space.size() as i64, hc).unwrap();
        if b.flops != want {
            return Err(format!("rminres counted {} expected {want}", b.flops));
        }
    }
    Ok("10 + 10 runs, integer equality".into())
}

fn gsvd_invariants() -> Outcome {
    let mut r = rng(5);
    let (mut norm_gap, mut recon, mut recip) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..100 {
        let p = r.random_range(1..=8);
        let t = r.random_range(1..=p);
        let j = random_matrix(&mut r, p, t);
        let h = random_spd(&mut r, t);
        let f = gsvd_pair(&j, &h).map_err(|e| format!("gsvd failed: {e}"))?;
        let mu = f.gen_values();
        if mu.windows(2).any(|w| w[1] < w[0]) {
            return Err(format!("generalized values out of order: {mu:?}"));
        }
        for (a, b) in f.alphas.iter().zip(&f.betas) {
            norm_gap = norm_gap.max((a * a + b * b - 1.0).abs());
        }
        let xinv = f.x.clone().try_inverse().ok_or("X singular")?;
        recon = recon.max((&f.vj * f.d_j() * &xinv - &j).norm() / j.norm());
        recon = recon.max((&f.vh * f.d_h() * &xinv - &h).norm() / h.norm());

        let f = gsvd_pair(&DMatrix::identity(t, t), &h).map_err(|e| format!("gsvd failed: {e}"))?;
        let mut ritz: Vec<f64> = h.clone().symmetric_eigen().eigenvalues.iter().map(|v| 1.0 / v).collect();
        ritz.sort_by(f64::total_cmp);
        for (m, want) in f.gen_values().iter().zip(&ritz) {
            recip = recip.max((m - want).abs() / want.abs());
        }
    }
    check(
        norm_gap <= 1e-10 && recon <= 1e-8 && recip <= 1e-8,
        format!("alpha^2+beta^2 gap {norm_gap:.1e}, reconstruction {recon:.1e}, reciprocal Ritz gap {recip:.1e}"),
    )
}

fn nsc_exactness() -> Outcome {
    let mut r = rng(6);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let n = r.random_range(6..=20);
        let p = r.random_range(2..=8);
        let hm = random_spd(&mut r, n);
        let jm = random_matrix(&mut r, p, n);
        let w = random_orthonormal(&mut r, n, n);
        let res = random_vec(&mut r, n);
        let jac = DenseJacobian::new(jm);
        let (_, nsc) = rgen_select(&w, &DenseOperator::new(hm.clone()), &jac, n, SizeSel::Small, Side::Right)
            .map_err(|e| format!("selection failed: {e}"))?;
        let exact = (materialize_jacobian(&jac) * hm.clone().cholesky().unwrap().solve(&dv(&res))).norm();
        worst = worst.max((nsc.value(&res) - exact).abs() / exact);
    }
    check(worst <= 1e-8, format!("max rel gap to |J H^-1 r| {worst:.1e}"))
}

fn hypergradient_fd() -> Outcome {
    let mut r = rng(7);
    let image = GrayImage {
        shape: ImageShape::new(6, 6),
        pixels: (0..36).map(|_| r.random_range(0.0..1.0)).collect(),
    };
    let cfg = RunConfig {
        rate: 0.5,
        noise: 0.1,
        filters: 2,
        kernel_size: 3,
        kernel_std: 0.5,
        ..RunConfig::default()
    };
    let (prob, theta) = make_inpainting(&cfg, &image).map_err(|e| e.to_string())?;
    let lower = LowerOptions {
        gtol: 1e-10,
        ..LowerOptions::default()
    };
    let rec = lower_solve(&theta, &prob, &[0.0; 36], &lower).map_err(|e| e.to_string())?;
    let mut seq = HessianSequence::new(HessianSolveConfig::new(StrategyDescriptor::NONE, 0, 1e-12).with_max_iter(5000));
    let (d, _) = hypergradient(&theta, &rec.x, &prob, &mut seq).map_err(|e| e.to_string())?;
    let base = theta.flatten();
    let step = 1e-5;
    let cost = |v: &[f64]| -> Result<f64, String> {
        let t = theta.with_values(v).map_err(|e| e.to_string())?;
        upper_cost(&t, &prob, &rec.x, &lower).map(|c| c.0).map_err(|e| e.to_string())
    };
    let mut fd = Vec::with_capacity(base.len());
    for k in 0..base.len() {
        let (mut plus, mut minus) = (base.clone(), base.clone());
        plus[k] += step;
        minus[k] -= step;
        fd.push((cost(&plus)? - cost(&minus)?) / (2.0 * step));
    }
    let err = rel(&dv(&d), &dv(&fd));
    check(err <= 1e-3, format!("rel gap to central differences {err:.1e} over {} parameters", base.len()))
}

struct DeskScale {
    seq: SequenceRecord,
    started: Instant,
}

fn desk_scale() -> Result<DeskScale, String> {
    let started = Instant::now();
    let cfg = RunConfig::default();
    let image = recycle_lab::image::load_image(&cfg.image).map_err(|e| e.to_string())?;
    let (prob, theta0) = make_inpainting(&cfg, &image).map_err(|e| e.to_string())?;
    let mut seq = record_sequence(&cfg, prob, &theta0).map_err(|e| e.to_string())?;
    compute_references(&mut seq, REFERENCE_TOL).map_err(|e| e.to_string())?;
    Ok(DeskScale { seq, started })
}

fn run_strategy(seq: &SequenceRecord, acronym: &str, stop: StopChoice) -> Result<ReplayReport, String> {
    let strategy: StrategyDescriptor = acronym.parse().map_err(|e| format!("{e}"))?;
    let cfg = ReplayConfig::new(strategy, 30, 1e-2).with_stop(stop).with_one_step(true);
    replay(seq, &cfg).map_err(|e| e.to_string())
}

fn directional(desk: &Result<DeskScale, String>) -> Outcome {
    let desk = desk.as_ref().map_err(Clone::clone)?;
    let seq = &desk.seq;
    let none = run_strategy(seq, "None", StopChoice::Residual)?;
    let ritz = run_strategy(seq, "Ritz-S", StopChoice::Residual)?;
    let rgen = run_strategy(seq, "RGen-L(R)", StopChoice::Residual)?;
    let nsc = run_strategy(seq, "RGen-L(R)-NSC", StopChoice::Nsc)?;
    let base = none.total_iterations() as f64;
    let a = ritz.total_iterations() as f64 <= 0.9 * base && rgen.total_iterations() as f64 <= 0.9 * base;
    let b = nsc.total_iterations() <= rgen.total_iterations();
    let max_err = nsc.max_hg_error().unwrap_or(f64::INFINITY);
    let reference = none.one_step_costs().ok_or("missing one-step costs")?;
    let cost_gap = nsc
        .one_step_costs()
        .ok_or("missing one-step costs")?
        .iter()
        .zip(&reference)
        .map(|(c, c0)| (c - c0).abs() / c0.abs())
        .fold(0.0, f64::max);
    let c = max_err <= 0.3 && cost_gap <= 0.05;
    let elapsed = desk.started.elapsed();
    let verdict = |ok: bool| if ok { "ok" } else { "FAILED" };
    check(
        a && b && c && elapsed < Duration::from_secs(600),
        format!(
            "(a) {}: None {}, Ritz-S {}, RGen-L(R) {}; (b) {}: RGen-L(R)-NSC {} vs RGen-L(R) {}; \
             (c) {}: NSC max hg error {max_err:.1e}, one-step cost gap {:.2}%; {elapsed:.1?}",
            verdict(a),
            none.total_iterations(),
            ritz.total_iterations(),
            rgen.total_iterations(),
            verdict(b),
            nsc.total_iterations(),
            rgen.total_iterations(),
            verdict(c),
            100.0 * cost_gap,
        ),
    )
}

fn similarity(desk: &Result<DeskScale, String>) -> Outcome {
    let desk = desk.as_ref().map_err(Clone::clone)?;
    let rows = similarity_report(&desk.seq).map_err(|e| e.to_string())?;
    let finite = rows
        .iter()
        .all(|r| r.hessian.is_finite() && r.hessian_probe.is_finite() && r.rhs.is_finite() && r.solution.is_finite());
    let gap = rows.iter().map(|r| (r.hessian - r.hessian_probe).abs()).fold(0.0, f64::max);
    check(
        finite && gap <= 1e-10 && rows.len() + 1 == desk.seq.len(),
        format!("{} rows, all finite: {finite}, dense vs probe gap {gap:.1e}", rows.len()),
    )
}

fn main() {
    let mut results: Vec<(usize, &str, Outcome)> = vec![
        (1, "solver correctness", solver_correctness()),
        (2, "recycling MINRES optimality", rminres_optimality()),
        (3, "residual recurrence", residual_recurrence()),
        (4, "FLOP identity", flop_identity()),
        (5, "GSVD invariants", gsvd_invariants()),
        (6, "NSC exactness", nsc_exactness()),
        (7, "hypergradient vs finite differences", hypergradient_fd()),
    ];
    let desk = desk_scale();
    results.push((8, "desk-scale directional reproduction", directional(&desk)));
    results.push((9, "similarity report", similarity(&desk)));
    let mut failed = 0;
    for (id, name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("criterion {id} PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {id} FAIL  {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", results.len());
        std::process::exit(1);
    }
}
