//! Subcommand implementations. Each returns `Failed` when a check it
//! reports on does not hold, after its rows are written.

use std::time::Instant;

use psqf::enumeration::{
    count_representations_batch, count_representations_with, segmented_squarefree_sieve,
    shifted_squarefree, von_mangoldt_progression, CountResult, SieveConfig,
};
use psqf::estimator::{build_moduli_set, check_materialize, WeightMode};
use psqf::global::global_product;
use psqf::series::{singular_series, singular_series_eulerform};
use psqf::verify::{run_suite, Hooks, Suite, VerifyBounds};
use psqf::{Estimator64, FactoredInt, LocalModel, ProgressionContext, Rational, SieveTables};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::output::emit;
use crate::{
    CliError, CompareArgs, Corruption, CountArgs, EstimateArgs, GlobalOpts, SelftestArgs,
    SeriesArgs, SuiteArg, VerifyArgs, WeightArg,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRow {
    pub suite: String,
    pub check: String,
    pub cases: u64,
    pub failures: u64,
    pub passed: bool,
    pub counterexample: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub n: u64,
    pub q: u64,
    pub a: u64,
    pub r_weighted: f64,
    pub r_unweighted: u64,
    pub series: f64,
    pub tail_bound: f64,
    pub vanished: bool,
    /// `R / (𝔖 N)`, absent when the series vanishes.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    pub n: u64,
    pub q_prime: u64,
    pub a_prime: u64,
    pub q1: u64,
    pub q2: u64,
    pub weights: String,
    pub moduli: usize,
    pub exceptional: usize,
    pub null_eta: usize,
    /// `[f|g]`, the Λ-weighted count.
    pub bilinear: f64,
    /// `⟨f|g⟩`.
    pub estimate: f64,
    /// `𝔖 N`.
    pub series_n: f64,
    pub ratio_bilinear: f64,
    pub ratio_series: f64,
    pub defect_f: f64,
    pub defect_g: f64,
    pub within_tolerance: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakdownRow {
    pub n: u64,
    pub q: u64,
    pub exceptional: bool,
    pub eta_norm: f64,
    pub kappa_norm: f64,
    pub m_phi: Option<f64>,
    pub m_psi: Option<f64>,
    pub f_phi: Option<f64>,
    pub phi_g: Option<f64>,
    pub f_psi: Option<f64>,
    pub psi_g: Option<f64>,
    pub contribution: f64,
    pub predicted_f_phi: f64,
    pub predicted_phi_g: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub n: u64,
    pub a: u64,
    pub q: u64,
    pub p_cutoff: u64,
    pub value: f64,
    pub tail_bound: f64,
    pub vanished: bool,
    pub eulerform_value: f64,
    pub eulerform_tail_bound: f64,
    pub delta: f64,
    pub agree: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountRow {
    pub n: u64,
    pub q: u64,
    pub a: u64,
    pub weighted: f64,
    pub unweighted: u64,
    pub lambda_weighted: f64,
}

impl From<&CountResult> for CountRow {
    fn from(c: &CountResult) -> Self {
        Self {
            n: c.n,
            q: c.q,
            a: c.a,
            weighted: c.weighted,
            unweighted: c.unweighted,
            lambda_weighted: c.lambda_weighted,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelftestRow {
    pub check: String,
    pub lo: u64,
    pub hi: u64,
    pub cases: u64,
    pub failures: u64,
    pub value: f64,
    pub passed: bool,
}

fn isqrt(n: u64) -> u64 {
    let mut r = (n as f64).sqrt() as u64;
    while r.saturating_mul(r) > n {
        r -= 1;
    }
    while (r + 1).saturating_mul(r + 1) <= n {
        r += 1;
    }
    r
}

/// Tables that factor every integer up to `n_max` and list primes up to
/// `prime_limit`.
fn tables_for(n_max: u64, prime_limit: u64) -> Result<SieveTables, CliError> {
    Ok(SieveTables::build(
        (isqrt(n_max) + 1).max(prime_limit).max(2),
    )?)
}

fn sieve_config(window_bytes: Option<usize>) -> SieveConfig {
    window_bytes
        .map(SieveConfig::from_memory_cap)
        .unwrap_or_default()
}

fn median(xs: &mut [f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    Some(if xs.len() % 2 == 1 {
        xs[m]
    } else {
        (xs[m - 1] + xs[m]) / 2.0
    })
}

fn negated_t(q: &FactoredInt) -> Rational {
    -psqf::arith::t_factor(q)
}

pub fn verify(g: &GlobalOpts, a: &VerifyArgs) -> Result<(), CliError> {
    let bounds = VerifyBounds {
        r_max: a.r_max,
        a_max: a.a_max,
        mn_max: a.mn_max,
        q_max: a.q_max,
        q_small_max: a.q_small_max,
        q_average_max: a.q_average_max,
        qp_max: a.qprime_max,
        n_values: a.n_values.clone(),
        random_cases: a.cases,
        estimator_n_max: a.estimator_n_max,
        seed: g.seed,
    };
    let hooks = match a.corrupt {
        None => Hooks::default(),
        Some(Corruption::TSign) => Hooks {
            t_factor: negated_t,
        },
    };
    let suites: Vec<Suite> = match a.suite {
        SuiteArg::Arith => vec![Suite::Arith],
        SuiteArg::Local => vec![Suite::Local],
        SuiteArg::Estimator => vec![Suite::Estimator],
        SuiteArg::All => Suite::ALL.to_vec(),
    };
    let mut rows = Vec::new();
    let mut failed = Vec::new();
    for suite in suites {
        let report = run_suite(suite, &bounds, &hooks)?;
        print!("{report}");
        for c in &report.checks {
            if !c.passed() {
                failed.push(format!("{}::{}", suite.name(), c.name));
            }
            rows.push(CheckRow {
                suite: suite.name().to_string(),
                check: c.name.to_string(),
                cases: c.cases,
                failures: c.failures,
                passed: c.passed(),
                counterexample: c.counterexample.clone(),
            });
        }
    }
    if let Some(path) = &g.out {
        emit(&rows, "verify", g.format, Some(path))?;
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failed(failed.join(", ")))
    }
}

pub fn compare(g: &GlobalOpts, a: &CompareArgs) -> Result<(), CliError> {
    if a.n_values.iter().any(|&n| n < 3) {
        return Err(CliError::Usage("--n values must be at least 3".into()));
    }
    let moduli: Vec<u64> = match a.q {
        Some(q) => vec![q],
        None => (1..=a.q_max).collect(),
    };
    let n_max = a.n_values.iter().copied().max().unwrap_or(3);
    let tables = tables_for(n_max, a.p_cutoff)?;
    let cfg = sieve_config(a.window_bytes);
    let mut rows = Vec::new();
    let mut problems = Vec::new();
    for &n in &a.n_values {
        let start = Instant::now();
        let table = count_representations_batch(n, &moduli, &tables, &cfg)?;
        let nf = tables.factorize(n)?;
        let mut errs = Vec::new();
        for c in table.coprime_results() {
            let qf = tables.factorize(c.q)?;
            let s = singular_series::<f64>(&nf, c.a as i64, &qf, a.p_cutoff, &tables)?;
            let ratio = (!s.vanished).then(|| c.weighted / (s.value * n as f64));
            if s.vanished && c.unweighted != 0 {
                problems.push(format!(
                    "N={n} q={} a={}: obstructed class has {} representations",
                    c.q, c.a, c.unweighted
                ));
            }
            if let Some(r) = ratio {
                errs.push((r - 1.0).abs());
            }
            rows.push(CompareRow {
                n,
                q: c.q,
                a: c.a,
                r_weighted: c.weighted,
                r_unweighted: c.unweighted,
                series: s.value,
                tail_bound: s.tail_bound,
                vanished: s.vanished,
                ratio,
            });
        }
        let classes = errs.len();
        let med = median(&mut errs);
        eprintln!(
            "N={n}: {classes} unobstructed classes, median |R/(SN) - 1| = {}, {:.2?}",
            med.map(|m| format!("{m:.6}"))
                .unwrap_or_else(|| "n/a".into()),
            start.elapsed()
        );
        if let Some(m) = med {
            if m > a.tolerance {
                problems.push(format!("N={n}: median {m:.6} > {}", a.tolerance));
            }
        }
    }
    emit(&rows, "compare", g.format, g.out.as_deref())?;
    if problems.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failed(problems.join("; ")))
    }
}

pub fn estimate(g: &GlobalOpts, a: &EstimateArgs) -> Result<(), CliError> {
    let mode = match a.weights {
        WeightArg::Exact => WeightMode::ExactCrossSum,
        WeightArg::Norm => WeightMode::NormForm {
            c: a.norm_c,
            eps: a.norm_eps,
        },
    };
    let n_max = a.n_values.iter().copied().max().unwrap_or(1);
    for &n in &a.n_values {
        check_materialize(n, a.max_materialize)?;
    }
    let tables = SieveTables::build(n_max.max(a.p_cutoff).max(2))?;
    let mut rows = Vec::new();
    let mut details = Vec::new();
    let mut problems = Vec::new();
    for &n in &a.n_values {
        let ctx = ProgressionContext::new(n, a.aprime, a.qprime)?;
        let (ap, qp) = (ctx.a_prime(), ctx.q_prime());
        let model = LocalModel::new(ctx, &tables);
        let moduli = build_moduli_set(a.q1, a.q2, &model)?;
        let est = Estimator64::new(&model, moduli, mode)?;
        let f = von_mangoldt_progression(n, ap, qp, &tables)?;
        let h = shifted_squarefree::<f64>(n, &tables)?;
        let pf = est.project(&f)?;
        let ph = est.project(&h)?;
        let bilinear = global_product(&f, &h)?;
        let estimate = est.inner_from(&pf, &ph);
        let s = singular_series::<f64>(
            &tables.factorize(n)?,
            ap as i64,
            &tables.factorize(qp)?,
            a.p_cutoff,
            &tables,
        )?;
        let series_n = s.value * n as f64;
        let defect_f = est.bessel_defect(&f)?;
        let defect_g = est.bessel_defect(&h)?;
        let ratio_bilinear = estimate / bilinear;
        let ratio_series = estimate / series_n;
        let within_tolerance = (ratio_bilinear - 1.0).abs() <= a.tolerance
            && (ratio_series - 1.0).abs() <= a.tolerance;
        if !within_tolerance {
            problems.push(format!(
                "N={n}: ratios {ratio_bilinear:.6}, {ratio_series:.6} outside {}",
                a.tolerance
            ));
        }
        if mode == WeightMode::ExactCrossSum {
            let ff = global_product(&f, &f)?;
            let hh = global_product(&h, &h)?;
            if defect_f < -1e-9 * ff || defect_g < -1e-9 * hh {
                problems.push(format!("N={n}: negative Bessel defect"));
            }
        }
        if a.breakdown {
            for b in est.breakdown(&pf, &ph)? {
                details.push(BreakdownRow {
                    n,
                    q: b.q,
                    exceptional: b.exceptional,
                    eta_norm: b.eta_norm,
                    kappa_norm: b.kappa_norm,
                    m_phi: b.m_phi,
                    m_psi: b.m_psi,
                    f_phi: b.f_phi,
                    phi_g: b.phi_g,
                    f_psi: b.f_psi,
                    psi_g: b.psi_g,
                    contribution: b.contribution,
                    predicted_f_phi: b.predicted_f_phi,
                    predicted_phi_g: b.predicted_phi_g,
                });
            }
        }
        rows.push(EstimateRow {
            n,
            q_prime: qp,
            a_prime: ap,
            q1: a.q1,
            q2: a.q2,
            weights: match a.weights {
                WeightArg::Exact => "exact".into(),
                WeightArg::Norm => "norm".into(),
            },
            moduli: est.moduli().members().len(),
            exceptional: est.moduli().exceptional().len(),
            null_eta: est.null_eta().len(),
            bilinear,
            estimate,
            series_n,
            ratio_bilinear,
            ratio_series,
            defect_f,
            defect_g,
            within_tolerance,
        });
    }
    if a.breakdown {
        emit(&details, "estimate-breakdown", g.format, g.out.as_deref())?;
    } else {
        emit(&rows, "estimate", g.format, g.out.as_deref())?;
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failed(problems.join("; ")))
    }
}

pub fn series(g: &GlobalOpts, a: &SeriesArgs) -> Result<(), CliError> {
    if a.n == 0 || a.q == 0 {
        return Err(CliError::Usage("--n and --q must be positive".into()));
    }
    let tables = tables_for(a.n.max(a.q), a.p_cutoff)?;
    let (nf, qf) = (tables.factorize(a.n)?, tables.factorize(a.q)?);
    let r = singular_series::<f64>(&nf, a.a, &qf, a.p_cutoff, &tables)?;
    let e = singular_series_eulerform::<f64>(&nf, a.a, &qf, a.p_cutoff, &tables)?;
    let delta = r.value - e.value;
    let scale = r.value.abs().max(e.value.abs());
    let agree =
        r.vanished == e.vanished && delta.abs() <= scale * (r.tail_bound + e.tail_bound) + 1e-12;
    let row = SeriesRow {
        n: a.n,
        a: psqf::arith::residue(a.a, a.q),
        q: a.q,
        p_cutoff: a.p_cutoff,
        value: r.value,
        tail_bound: r.tail_bound,
        vanished: r.vanished,
        eulerform_value: e.value,
        eulerform_tail_bound: e.tail_bound,
        delta,
        agree,
    };
    emit(&[row], "series", g.format, g.out.as_deref())?;
    if agree {
        Ok(())
    } else {
        Err(CliError::Failed(format!("forms differ by {delta:e}")))
    }
}

pub fn count(g: &GlobalOpts, a: &CountArgs) -> Result<(), CliError> {
    let tables = tables_for(a.n, 2)?;
    let cfg = sieve_config(a.window_bytes);
    let start = Instant::now();
    let rows: Vec<CountRow> = match a.a {
        Some(r) => vec![CountRow::from(&count_representations_with(
            a.n, r, a.q, &tables, &cfg,
        )?)],
        None => {
            if a.n < 3 {
                return Err(CliError::Usage("--n must be at least 3".into()));
            }
            count_representations_batch(a.n, &[a.q], &tables, &cfg)?
                .coprime_results()
                .iter()
                .map(CountRow::from)
                .collect()
        }
    };
    eprintln!("counted N={} q={} in {:.2?}", a.n, a.q, start.elapsed());
    emit(&rows, "count", g.format, g.out.as_deref())
}

pub fn sieve_selftest(g: &GlobalOpts, a: &SelftestArgs) -> Result<(), CliError> {
    if a.len == 0 || a.density_len == 0 {
        return Err(CliError::Usage("window lengths must be positive".into()));
    }
    let hi = a.lo + a.len;
    let dhi = a.density_lo + a.density_len;
    let tables = tables_for(hi.max(dhi), 2)?;
    let mut rows = Vec::new();

    let bits = segmented_squarefree_sieve(a.lo, hi, &tables)?;
    let mut rng = ChaCha8Rng::seed_from_u64(g.seed);
    let mut failures = 0;
    for _ in 0..a.samples {
        let m = rng.gen_range(a.lo..hi);
        if bits[(m - a.lo) as usize] != tables.factorize(m)?.is_squarefree() {
            failures += 1;
        }
    }
    rows.push(SelftestRow {
        check: "samples_vs_factorization".into(),
        lo: a.lo,
        hi,
        cases: a.samples as u64,
        failures,
        value: bits.count_ones() as f64 / a.len as f64,
        passed: failures == 0 && a.samples > 0,
    });

    let dens = segmented_squarefree_sieve(a.density_lo, dhi, &tables)?.count_ones() as f64
        / a.density_len as f64;
    let target = 6.0 / (std::f64::consts::PI * std::f64::consts::PI);
    let ok = ((dens - target) / target).abs() <= a.density_tolerance;
    rows.push(SelftestRow {
        check: "density".into(),
        lo: a.density_lo,
        hi: dhi,
        cases: a.density_len,
        failures: u64::from(!ok),
        value: dens,
        passed: ok,
    });

    emit(&rows, "sieve-selftest", g.format, g.out.as_deref())?;
    let bad: Vec<_> = rows
        .iter()
        .filter(|r| !r.passed)
        .map(|r| r.check.clone())
        .collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failed(bad.join(", ")))
    }
}
