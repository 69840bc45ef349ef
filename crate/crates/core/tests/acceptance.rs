//! Acceptance checks, one line per criterion.
//!
//! Runs without the libtest harness so the report is always printed:
//! `cargo test -p idiolens --test acceptance`.

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use idiolens::ingest::{self, AnnotatedTerm, Label, TermRecord};
use idiolens::report::{self, EvalOptions};
use idiolens::scorer::{optimal_alpha_general, optimal_alpha_pair, self_explainability};
use idiolens::stats;
use idiolens::vectors::{self, EmbeddingVector};
use idiolens::Execution;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn random_vec(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        if v.iter().any(|&x| x != 0.0) {
            return v;
        }
    }
}

fn ev(v: Vec<f64>) -> EmbeddingVector {
    EmbeddingVector::new(v).unwrap()
}

/// Two constituents and a term vector built partly from them.
fn instance(rng: &mut impl Rng, dim: usize) -> [Vec<f64>; 3] {
    let r1 = random_vec(rng, dim);
    let lean = rng.random_range(-0.9..0.9);
    let r2: Vec<f64> = random_vec(rng, dim)
        .iter()
        .zip(&r1)
        .map(|(x, y)| x + lean * y)
        .collect();
    let (u, v, w) = (
        rng.random_range(-2.0..2.0),
        rng.random_range(-2.0..2.0),
        rng.random_range(0.0..2.0),
    );
    let noise = random_vec(rng, dim);
    let rs = (0..dim)
        .map(|i| u * r1[i] + v * r2[i] + w * noise[i])
        .collect();
    [r1, r2, rs]
}

fn units(inst: &[Vec<f64>; 3]) -> [EmbeddingVector; 3] {
    inst.clone().map(|v| vectors::normalize(&ev(v)).unwrap())
}

fn achieved(u: &[EmbeddingVector; 3], alpha: &[f64]) -> f64 {
    let mix = vectors::weighted_sum(&u[..2], alpha).unwrap();
    vectors::cosine(&mix, &u[2]).unwrap()
}

/// Best cosine over the α grid, evaluated from pairwise dot products of the
/// unit vectors.
fn grid_best(u: &[EmbeddingVector; 3]) -> f64 {
    let d = |a: &EmbeddingVector, b: &EmbeddingVector| vectors::dot(a, b).unwrap();
    let (g12, g1s, g2s) = (d(&u[0], &u[1]), d(&u[0], &u[2]), d(&u[1], &u[2]));
    let steps = 1200;
    let at = |k: usize| -3.0 + 6.0 * k as f64 / steps as f64;
    let mut best = -1.0f64;
    for i in 0..=steps {
        let a1 = at(i);
        for j in 0..=steps {
            let a2 = at(j);
            let norm2 = a1 * a1 + a2 * a2 + 2.0 * a1 * a2 * g12;
            if norm2 > 1e-24 {
                best = best.max((a1 * g1s + a2 * g2s) / norm2.sqrt());
            }
        }
    }
    best
}

fn closed_form_optimality() -> Check {
    let start = Instant::now();
    let mut worst = f64::INFINITY;
    for (seed, dim) in [(1u64, 4usize), (2, 8), (3, 64)] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let insts: Vec<_> = (0..1000).map(|_| instance(&mut rng, dim)).collect();
        let gap = insts
            .par_iter()
            .map(|inst| {
                let u = units(inst);
                let t = vectors::similarity_triple(&u[0], &u[1], &u[2]).unwrap();
                let alpha = optimal_alpha_pair(&t).unwrap();
                achieved(&u, alpha.as_slice()) - grid_best(&u)
            })
            .reduce(|| f64::INFINITY, f64::min);
        worst = worst.min(gap);
    }
    let secs = start.elapsed().as_secs_f64();
    let detail = format!("3000 instances, min(closed - grid) = {worst:.3e}, {secs:.1}s");
    if worst >= -1e-4 && secs < 60.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn closed_form_matches_gram() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst_cross = 0.0f64;
    let mut worst_cos = 0.0f64;
    for k in 0..1000 {
        let inst = instance(&mut rng, [4, 8, 64][k % 3]);
        let u = units(&inst);
        let t = vectors::similarity_triple(&u[0], &u[1], &u[2]).unwrap();
        let a = optimal_alpha_pair(&t).unwrap();
        let g = optimal_alpha_general(
            &[ev(inst[0].clone()), ev(inst[1].clone())],
            &ev(inst[2].clone()),
        )
        .unwrap();
        let (a, g) = (a.as_slice(), g.weights.as_slice());
        let scale = (a[0].hypot(a[1])) * (g[0].hypot(g[1]));
        if a[0] * g[0] + a[1] * g[1] <= 0.0 {
            return Err(format!("instance {k}: factor not positive"));
        }
        worst_cross = worst_cross.max((a[0] * g[1] - a[1] * g[0]).abs() / scale);
        worst_cos = worst_cos.max((achieved(&u, a) - achieved(&u, g)).abs());
    }
    let detail =
        format!("1000 pairs, max |sin| = {worst_cross:.1e}, max cosine gap = {worst_cos:.1e}");
    if worst_cross <= 1e-9 && worst_cos <= 1e-9 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn orthogonal_identity() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let dim = 8;
        let r1 = random_vec(&mut rng, dim);
        let raw = random_vec(&mut rng, dim);
        let n1: f64 = r1.iter().map(|x| x * x).sum();
        let proj: f64 = r1.iter().zip(&raw).map(|(a, b)| a * b).sum::<f64>() / n1;
        let r2: Vec<f64> = raw.iter().zip(&r1).map(|(b, a)| b - proj * a).collect();
        let rs = random_vec(&mut rng, dim);
        let u = units(&[r1, r2, rs]);
        let t = vectors::similarity_triple(&u[0], &u[1], &u[2]).unwrap();
        let a = optimal_alpha_pair(&t).unwrap();
        worst = worst
            .max((a.as_slice()[0] - t.r1s).abs())
            .max((a.as_slice()[1] - t.r2s).abs());
    }
    // exactly orthogonal integer axes
    let u = units(&[
        vec![3.0, 0.0, 0.0],
        vec![0.0, -2.0, 0.0],
        vec![1.0, 2.0, 2.0],
    ]);
    let t = vectors::similarity_triple(&u[0], &u[1], &u[2]).unwrap();
    let a = optimal_alpha_pair(&t).unwrap();
    if a.as_slice() != [t.r1s, t.r2s] || t.r12 != 0.0 {
        return Err(format!("axis case gave {:?}", a.as_slice()));
    }
    let detail = format!("1000 instances, max |alpha - (r1s, r2s)| = {worst:.1e}");
    if worst <= 1e-12 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn scale_and_swap_invariance() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut worst = 0.0f64;
    for k in 0..1000 {
        let inst = instance(&mut rng, [4, 8, 64][k % 3]);
        let base = self_explainability(
            &[ev(inst[0].clone()), ev(inst[1].clone())],
            &ev(inst[2].clone()),
        )
        .unwrap()
        .score;
        let c: [f64; 3] = [0, 1, 2].map(|_| 10f64.powf(rng.random_range(-3.0..3.0)));
        let sc = |i: usize| ev(inst[i].iter().map(|x| x * c[i]).collect());
        let scaled = self_explainability(&[sc(0), sc(1)], &sc(2)).unwrap().score;
        let swapped = self_explainability(
            &[ev(inst[1].clone()), ev(inst[0].clone())],
            &ev(inst[2].clone()),
        )
        .unwrap()
        .score;
        worst = worst.max((base - scaled).abs()).max((base - swapped).abs());
    }
    let detail = format!("1000 instances, max score change = {worst:.1e}");
    if worst <= 1e-9 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn pairwise_auc(pairs: &[(f64, bool)]) -> f64 {
    let mut wins = 0.0;
    let mut total = 0.0;
    for &(p, ip) in pairs {
        if !ip {
            continue;
        }
        for &(q, iq) in pairs {
            if iq {
                continue;
            }
            total += 1.0;
            wins += if p < q {
                1.0
            } else if p == q {
                0.5
            } else {
                0.0
            };
        }
    }
    wins / total
}

fn auc_matches_pairwise() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut worst = 0.0f64;
    for k in 0..100 {
        let n = rng.random_range(2..=1000);
        let coarse = k % 2 == 0;
        let prevalence = rng.random_range(0.02..0.98);
        let mut pairs: Vec<(f64, bool)> = (0..n)
            .map(|_| {
                let idio = rng.random_bool(prevalence);
                let mut s: f64 = rng.random_range(0.0..1.0) - if idio { 0.2 } else { 0.0 };
                if coarse {
                    s = (s * 20.0).round() / 20.0;
                }
                (s, idio)
            })
            .collect();
        pairs[0].1 = true;
        pairs[1].1 = false;
        let auc = stats::roc_from_pairs(&pairs)
            .map_err(|e| e.to_string())?
            .auc;
        worst = worst.max((auc - pairwise_auc(&pairs)).abs());
    }
    let detail = format!("100 sets, max |trapezoid - pairwise| = {worst:.1e}");
    if worst <= 1e-9 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn expected_precision_arithmetic() -> Check {
    let p = stats::expected_precision(0.026, 0.5, 0.05);
    let detail = format!("expected_precision(0.026, 0.5, 0.05) = {p:?}");
    if p == 0.26 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn labels(annotator: &str, xs: &[bool]) -> Vec<AnnotatedTerm> {
    xs.iter()
        .enumerate()
        .map(|(i, &idio)| AnnotatedTerm {
            term: format!("t{i}"),
            label: if idio {
                Label::Idiomatic
            } else {
                Label::SelfExplanatory
            },
            annotator: annotator.into(),
        })
        .collect()
}

fn kappa_cases() -> Check {
    let four = stats::cohen_kappa(
        &labels("A", &[true, true, false, false]),
        &labels("B", &[true, false, true, false]),
    )
    .map_err(|e| e.to_string())?;
    if four.agreement != 0.5 || four.kappa() != Ok(0.0) {
        return Err(format!("four-item case: {four:?}"));
    }
    let xs = [true, false, false, true, false];
    let perfect =
        stats::cohen_kappa(&labels("A", &xs), &labels("B", &xs)).map_err(|e| e.to_string())?;
    if perfect.kappa() != Ok(1.0) {
        return Err(format!("perfect case: {perfect:?}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(51);
    for k in 0..100 {
        let n = rng.random_range(1..200);
        let (pa, pb) = (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
        let a: Vec<bool> = (0..n).map(|_| rng.random_bool(pa)).collect();
        let b: Vec<bool> = (0..n).map(|_| rng.random_bool(pb)).collect();
        let ab =
            stats::cohen_kappa(&labels("A", &a), &labels("B", &b)).map_err(|e| e.to_string())?;
        let ba =
            stats::cohen_kappa(&labels("B", &b), &labels("A", &a)).map_err(|e| e.to_string())?;
        if ab.kappa_opt() != ba.kappa_opt() || ab.agreement != ba.agreement {
            return Err(format!("set {k}: {ab:?} vs {ba:?}"));
        }
    }
    Ok("four-item 0.5/0.0, perfect 1.0, 100 swapped sets identical".into())
}

fn pipeline_golden() -> Check {
    let fx = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/pipeline");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = dir.path();
    let e = |e: report::ReportError| e.to_string();
    let scores = out.join("scores.csv");
    let s = report::cmd_score(
        &fx.join("terms.txt"),
        &fx.join("store.jsonl"),
        &scores,
        false,
        Execution::default(),
    )
    .map_err(e)?;
    if s.is_partial() {
        return Err(format!("fixture scored partially: {s:?}"));
    }
    report::cmd_outliers(&scores, 0.25, None, &out.join("outliers.csv")).map_err(e)?;
    let opts = EvalOptions {
        tail_fraction: 0.25,
        annotator: None,
    };
    report::cmd_eval(&scores, &fx.join("annotations.csv"), out, &opts).map_err(e)?;

    let mut mismatched = Vec::new();
    for (got, want) in [
        ("scores.csv", "expected_scores.csv"),
        ("outliers.csv", "expected_outliers.csv"),
        ("roc.csv", "expected_roc.csv"),
        ("summary.json", "expected_summary.json"),
    ] {
        let a = fs::read(out.join(got)).map_err(|e| format!("{got}: {e}"))?;
        let b = fs::read(fx.join(want)).map_err(|e| format!("{want}: {e}"))?;
        if a != b {
            mismatched.push(got);
        }
    }
    if mismatched.is_empty() {
        Ok("scores.csv, outliers.csv, roc.csv, summary.json byte-identical".into())
    } else {
        Err(format!("differs: {}", mismatched.join(", ")))
    }
}

fn filter_boundaries() -> Check {
    let mut names = Vec::new();
    for (word, count) in [
        ("nine", 9),
        ("ten", 10),
        ("tenk", 10_000),
        ("tenk1", 10_001),
    ] {
        // each probe name below uses its words once
        let used = match word {
            "nine" | "tenk1" => 1,
            _ => 4,
        };
        for _ in 0..(count - used) {
            names.push(word.to_string());
        }
    }
    let probes = ["ten tenk", "tenk ten", "nine ten", "tenk tenk1", "ten tenk"];
    names.extend(probes.iter().map(|s| s.to_string()));
    let records: Vec<TermRecord> = names
        .iter()
        .map(|n| TermRecord::parse(n).unwrap())
        .collect();
    let vocab = ingest::build_vocab(&records);
    let counts: Vec<u64> = ["nine", "ten", "tenk", "tenk1"]
        .iter()
        .map(|w| vocab.count(w))
        .collect();
    if counts != [9, 10, 10_000, 10_001] {
        return Err(format!("fixture counts {counts:?}"));
    }
    let kept: Vec<String> = ingest::filter_two_word_terms(
        &records,
        &vocab,
        ingest::DEFAULT_MAX_FREQ,
        ingest::DEFAULT_MIN_FREQ,
    )
    .into_iter()
    .map(|t| t.term)
    .collect();
    if kept == ["ten tenk", "tenk ten", "ten tenk"] {
        Ok("counts 10 and 10000 kept, 9 and 10001 excluded".into())
    } else {
        Err(format!("kept {kept:?}"))
    }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        (
            "closed-form optimality vs grid search",
            closed_form_optimality,
        ),
        (
            "closed form collinear with Gram solution",
            closed_form_matches_gram,
        ),
        (
            "orthogonal constituents give alpha = (r1s, r2s)",
            orthogonal_identity,
        ),
        (
            "scale and constituent-swap invariance",
            scale_and_swap_invariance,
        ),
        (
            "trapezoidal AUC equals pairwise statistic",
            auc_matches_pairwise,
        ),
        (
            "expected precision arithmetic",
            expected_precision_arithmetic,
        ),
        ("Cohen's kappa cases and swap symmetry", kappa_cases),
        ("pipeline golden run", pipeline_golden),
        ("frequency filter boundaries", filter_boundaries),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS  {}. {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {}. {name}: {detail}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
