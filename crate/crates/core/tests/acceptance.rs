//! Acceptance suite: one PASS/FAIL line per criterion.

use std::path::Path;
use std::time::{Duration, Instant};

use clap::Parser;
use pwdyn::bifurcation::{
    codim2_reduce, farey_adjacency, fill_plateau_gaps, geometry_agrees, is_monotone, plateaus, scan_curve, staircase,
    unresolved_fraction, CurveFamily, Outcome, ParamCurve, ScanOptions, StairStep,
};
use pwdyn::circlemap::{self, reduce, CircleLift, RigidRotation};
use pwdyn::cli::{execute, planar_sweep, Cli};
use pwdyn::farey::{farey_parents, farey_sequence, gcd, mediant};
use pwdyn::models::{firing_number_scan, planar_scan, IfModel, PlanarRelayModel, ScalarField};
use pwdyn::pwmap::PiecewiseMap1D;
use pwdyn::symbolic::{enumerate_wpq, farey_word, ENUMERATION_LIMIT};
use pwdyn::{Rational, SymbolicWord};

const ROTATION_N: usize = 100_000;
const LIFT_RESIDUAL_TOL: f64 = 1e-9;
const EXPANSION_TOL: f64 = 1e-9;
const GAP_DEPTH: usize = 30;

struct Verdict {
    ok: bool,
    detail: String,
}

fn verdict(ok: bool, detail: impl Into<String>) -> Verdict {
    Verdict { ok, detail: detail.into() }
}

fn r(p: u64, q: u64) -> Rational {
    Rational::new(p, q).unwrap()
}

fn w(s: &str) -> SymbolicWord {
    s.parse().unwrap()
}

fn adding_family() -> CurveFamily {
    CurveFamily {
        base: PiecewiseMap1D::linear(0.5, 0.5, 1.0, 1.0).unwrap(),
        curve: ParamCurve::quarter_circle(1.0),
    }
}

fn incrementing_family() -> CurveFamily {
    CurveFamily {
        base: PiecewiseMap1D::linear(0.5, -0.5, 1.0, 1.0).unwrap(),
        curve: ParamCurve::quarter_circle(1.0),
    }
}

fn codim2_source() -> PiecewiseMap1D {
    PiecewiseMap1D::linear(-2.5, 1.2, -1.45, 1.0).unwrap()
}

fn if_base() -> IfModel {
    IfModel {
        field: ScalarField::affine(-0.5, 0.2),
        theta: 1.0,
        amplitude: 0.0,
        duty: 0.5,
        period: 1.9,
    }
}

fn planar_base() -> PlanarRelayModel {
    PlanarRelayModel {
        a0: -2.0,
        a1: -5.0,
        b: 1.0,
        k: -1.0,
        period: 0.1,
        c1: 1.5,
        y_star: 0.0,
    }
}

/// Evenly spaced amplitudes, both ends included.
fn amplitudes(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn maximin_or_ordered(word: &SymbolicWord) -> bool {
    if word.len() <= ENUMERATION_LIMIT {
        word.is_maximin().unwrap_or(false)
    } else {
        word.is_pq_ordered().unwrap_or(false)
    }
}

fn symbolic_exactness() -> Verdict {
    let mut classes = 0usize;
    for q in 1..=14usize {
        for p in 0..=q {
            if gcd(p as u64, q as u64) != 1 {
                continue;
            }
            let words = enumerate_wpq(p, q, true).unwrap();
            classes += words.len();
            let expected = farey_word(r(p as u64, q as u64)).unwrap();
            let mut maximin_classes = Vec::new();
            for word in &words {
                let maximin = word.is_maximin().unwrap();
                let minimax = word.is_minimax().unwrap();
                let ordered = word.is_pq_ordered().unwrap();
                if maximin != minimax || maximin != ordered {
                    return verdict(false, format!("{word}: maximin={maximin} minimax={minimax} ordered={ordered}"));
                }
                if maximin {
                    maximin_classes.push(word.clone());
                }
            }
            if maximin_classes.len() != 1 {
                return verdict(false, format!("{p}/{q}: {} maximin classes", maximin_classes.len()));
            }
            if !maximin_classes[0].same_cycle(&expected) {
                return verdict(false, format!("{p}/{q}: maximin {} vs farey word {expected}", maximin_classes[0]));
            }
        }
    }
    verdict(true, format!("{classes} rotation classes"))
}

fn worked_examples() -> Verdict {
    let mut fails = Vec::new();
    let f6: Vec<String> = farey_sequence(6).unwrap().iter().map(|x| x.to_string()).collect();
    let expected = "0/1 1/6 1/5 1/4 1/3 2/5 1/2 3/5 2/3 3/4 4/5 5/6 1/1";
    if f6.join(" ") != expected {
        fails.push(format!("F_6 = {}", f6.join(" ")));
    }
    if w("RRRL").eta_number() != r(3, 4) || w("LLRLR").eta_number() != r(2, 5) {
        fails.push("eta".to_string());
    }
    if w("LLR").minimal_rotation() != w("LLR") || w("LLR").maximal_rotation() != w("RLL") {
        fails.push("min/max rotation of LLR".to_string());
    }
    if w("LLRLR").pq_ordering().unwrap() != Some(3) || w("LLLRR").pq_ordering().unwrap().is_some() {
        fails.push("pq-ordering witness".to_string());
    }
    let parents = farey_parents(r(8, 11)).unwrap();
    if (parents.left, parents.right) != (r(5, 7), r(3, 4)) || parents.left.denom() + parents.right.denom() != 11 {
        fails.push(format!("parents(8/11) = {}, {}", parents.left, parents.right));
    }
    let (alpha, gamma) = (w("LLR"), w("LR"));
    let beta = alpha.concat(&gamma);
    let delta = alpha.concat(&beta);
    let ok = delta == w("LLRLLRLR")
        && beta == w("LLRLR")
        && delta == w("LLR").substitute(&alpha, &gamma)
        && beta == w("LR").substitute(&alpha, &gamma)
        && farey_word(r(1, 3)).unwrap() == alpha
        && farey_word(r(1, 2)).unwrap() == gamma
        && farey_word(r(2, 5)).unwrap() == beta
        && farey_word(r(3, 8)).unwrap() == delta
        && delta.eta_number() == mediant(r(1, 3), r(2, 5)).unwrap();
    if !ok {
        fails.push("collapse words".to_string());
    }
    verdict(fails.is_empty(), if fails.is_empty() { "all exact".to_string() } else { fails.join("; ") })
}

fn period_adding() -> Verdict {
    let opts = ScanOptions::default();
    let records = scan_curve(&adding_family(), 2000, &opts).unwrap();
    let steps = staircase(&records);
    let resolved: Vec<Rational> = steps.iter().filter_map(|s| s.eta).collect();
    let ends = resolved.first() == Some(&Rational::ZERO) && resolved.last() == Some(&Rational::ONE);
    let monotone = is_monotone(&steps);
    let locked = 1.0 - unresolved_fraction(&steps);
    let filled = fill_plateau_gaps(&adding_family(), &records, GAP_DEPTH, &opts);
    let adjacency = farey_adjacency(&plateaus(&filled));
    let mut word_fail = 0;
    let mut worst_residual: f64 = 0.0;
    for rec in &records {
        if let Outcome::Periodic { orbit } = &rec.outcome {
            let expected = farey_word(orbit.eta).unwrap();
            if !maximin_or_ordered(&orbit.word) || orbit.word != expected {
                word_fail += 1;
            }
        }
        if let Some(lock) = rec.rotation.and_then(|r| r.lock) {
            worst_residual = worst_residual.max(lock.residual.abs());
        }
    }
    let ok = ends
        && monotone
        && locked >= 0.95
        && adjacency.violations.is_empty()
        && adjacency.triples_checked > 0
        && word_fail == 0
        && worst_residual < LIFT_RESIDUAL_TOL;
    verdict(
        ok,
        format!(
            "monotone={monotone} ends={ends} locked={:.2}% gap samples={} triples={} violations={} word_failures={word_fail} max_residual={worst_residual:.1e}",
            100.0 * locked,
            filled.len() - records.len(),
            adjacency.triples_checked,
            adjacency.violations.len()
        ),
    )
}

fn period_incrementing() -> Verdict {
    let records = scan_curve(&incrementing_family(), 2000, &ScanOptions::default()).unwrap();
    let mut bad_words = 0;
    let mut bad_pairs = 0;
    let mut disagreements = 0;
    let mut coexistence = 0;
    for rec in &records {
        for o in rec.outcome.orbits() {
            if o.word != SymbolicWord::l_power_r(o.period - 1) {
                bad_words += 1;
            }
        }
        if let Outcome::Coexistence { first, second } = &rec.outcome {
            coexistence += 1;
            let (a, b) = (first.period.min(second.period), first.period.max(second.period));
            if b != a + 1 {
                bad_pairs += 1;
            }
        }
        if !geometry_agrees(&rec.outcome, rec.geometry.as_ref()) {
            disagreements += 1;
        }
    }
    verdict(
        bad_words == 0 && bad_pairs == 0 && disagreements == 0 && coexistence > 0,
        format!("non-LnR words={bad_words} coexistence samples={coexistence} bad pairs={bad_pairs} disagreements={disagreements}"),
    )
}

/// `F + t`, pointwise above `F` for `t > 0`.
struct Shifted<'a, F: CircleLift> {
    inner: &'a F,
    t: f64,
}

impl<F: CircleLift> CircleLift for Shifted<'_, F> {
    fn base(&self, y: f64) -> f64 {
        self.inner.base(y) + self.t
    }

    fn base_left_end(&self) -> f64 {
        self.inner.base_left_end() + self.t
    }
}

fn rotation_contracts() -> Verdict {
    let n = ROTATION_N;
    let tol = 2.0 / n as f64;
    let family = adding_family();
    let mut spread_max: f64 = 0.0;
    let mut monotone = true;
    for lambda in [0.1, 0.3, 0.5, 0.7, 0.9] {
        let lift = reduce(&pwdyn::bifurcation::MapFamily::at(&family, lambda).unwrap()).unwrap().lift();
        let est: Vec<f64> = (0..16)
            .map(|i| circlemap::rotation_number_from(&lift, i as f64 / 16.0, n, 100).unwrap().estimate)
            .collect();
        let (lo, hi) = est.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &e| (a.min(e), b.max(e)));
        spread_max = spread_max.max(hi - lo);
        let mut prev = f64::NEG_INFINITY;
        for k in 0..40 {
            let shifted = Shifted { inner: &lift, t: 0.4 * k as f64 / 39.0 };
            let e = circlemap::rotation_number(&shifted, n, 100).unwrap().estimate;
            if e < prev - tol {
                monotone = false;
            }
            prev = prev.max(e);
        }
    }
    let mut rigid_fail = 0;
    let mut rigid_count = 0;
    for q in 1..=40u64 {
        for p in 0..=q {
            if gcd(p, q) != 1 {
                continue;
            }
            rigid_count += 1;
            let f = RigidRotation { shift: r(p, q) };
            let res = circlemap::rotation_number(&f, n, 100).unwrap();
            match res.lock {
                Some(l) if l.ratio == r(p, q) && l.residual == 0.0 => {}
                _ => rigid_fail += 1,
            }
        }
    }
    verdict(
        spread_max <= tol && monotone && rigid_fail == 0,
        format!("seed spread={spread_max:.2e} (bound {tol:.0e}) monotone={monotone} rigid={}/{rigid_count}", rigid_count - rigid_fail),
    )
}

fn codim2() -> Verdict {
    let source = codim2_source();
    let composed = match codim2_reduce(&source, &w("LRL"), &w("RL")) {
        Ok(c) => c,
        Err(e) => return verdict(false, e.to_string()),
    };
    let mut worst: f64 = 0.0;
    let mut words = Vec::new();
    for word in ["LR", "LLR"] {
        let orbit = match composed.map.solve_orbit(&w(word), None) {
            Ok(o) => o,
            Err(e) => return verdict(false, format!("composed {word}: {e}")),
        };
        let expanded = match composed.expand_orbit(&orbit) {
            Ok(o) => o,
            Err(e) => return verdict(false, format!("expansion of {word}: {e}")),
        };
        let direct = match source.solve_orbit(&expanded.word, None) {
            Ok(o) => o,
            Err(e) => return verdict(false, format!("source {}: {e}", expanded.word)),
        };
        if direct.word != expanded.word || direct.points.len() != expanded.points.len() {
            return verdict(false, format!("word mismatch {} vs {}", direct.word, expanded.word));
        }
        let counts = orbit.word.l_count() * 3 + orbit.word.r_count() * 2 == expanded.word.len()
            && orbit.word.l_count() + orbit.word.r_count() == expanded.word.r_count();
        if !counts {
            return verdict(false, "symbol-count identity".to_string());
        }
        for (a, b) in direct.points.iter().zip(&expanded.points) {
            worst = worst.max((a - b).abs());
        }
        words.push(format!("{word}->{}", expanded.word));
    }
    verdict(worst < EXPANSION_TOL, format!("{} max deviation {worst:.1e}", words.join(" ")))
}

fn if_model() -> Verdict {
    let opts = ScanOptions::default();
    let window = firing_number_scan(&if_base(), &amplitudes(2.2, 3.2, 400), &opts);
    let mut identity_fail = 0;
    let mut locked = 0;
    let mut not_contracting = 0;
    for rec in &window {
        if !rec.contracting {
            not_contracting += 1;
        }
        if let (Some(eta), Some(rho)) = (rec.eta, rec.rho) {
            locked += 1;
            let sum = Rational::integer(rec.spikes_low as u64).checked_add(&rho).unwrap();
            if sum != eta || rec.spike_average != Some(eta) {
                identity_fail += 1;
            }
        }
    }
    let steps: Vec<StairStep> = window.iter().map(|r| StairStep { lambda: r.amplitude, eta: r.eta }).collect();
    let monotone = is_monotone(&steps);
    let spans = window.first().and_then(|r| r.eta) == Some(Rational::integer(2))
        && window.last().and_then(|r| r.eta) == Some(Rational::integer(3));

    let incomplete = firing_number_scan(&if_base(), &amplitudes(0.3, 1.1, 200), &opts);
    let flagged = incomplete.iter().filter(|r| r.weak_expansion).count();
    let errors = incomplete.iter().filter(|r| r.eta.is_none() && !r.weak_expansion).count();
    let ok = identity_fail == 0 && not_contracting == 0 && monotone && spans && locked > 0 && flagged > 0 && errors == 0;
    verdict(
        ok,
        format!(
            "window A in [2.2, 3.2]: locked={locked}/400 identity failures={identity_fail} non-contracting={not_contracting} monotone={monotone} spans 2..3={spans}; incomplete window A in [0.3, 1.1]: expansion flagged={flagged} hard failures={errors}"
        ),
    )
}

fn planar_relay() -> Verdict {
    let base = planar_base();
    let points = planar_sweep(&base, 200).unwrap();
    let results = planar_scan(&base, &points);
    let mut bad = 0;
    let mut not_virtual = 0;
    let mut max_attractors = 0;
    let mut pairs = 0;
    for p in &results {
        let Some(a) = &p.analysis else {
            bad += 1;
            continue;
        };
        if !a.both_virtual {
            not_virtual += 1;
        }
        max_attractors = max_attractors.max(a.orbits.len());
        if a.orbits.len() == 2 {
            pairs += 1;
        }
        if !a.quasi_contraction_ok() {
            bad += 1;
        }
    }
    verdict(
        bad == 0 && not_virtual == 0,
        format!("points=200 violations={bad} outside regime={not_virtual} max attractors={max_attractors} coexisting pairs={pairs}"),
    )
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

fn cli_csv(args: &[&str], jobs: usize) -> Result<String, String> {
    let jobs = jobs.to_string();
    let argv = ["pwdyn", "--jobs", jobs.as_str()].into_iter().chain(args.iter().copied());
    let cli = Cli::try_parse_from(argv).map_err(|e| e.to_string())?;
    execute(&cli).map(|o| o.primary).map_err(|e| e.to_string())
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let add = write(dir.path(), "add.json", r#"{"left":{"kind":"linear","slope":0.5},"right":{"kind":"linear","slope":0.5}}"#);
    let inc = write(dir.path(), "inc.json", r#"{"left":{"kind":"linear","slope":0.5},"right":{"kind":"linear","slope":-0.5}}"#);
    let src = write(
        dir.path(),
        "src.json",
        r#"{"left":{"kind":"linear","slope":-2.5},"right":{"kind":"linear","slope":1.2},"mu_left":-1.45,"mu_right":1.0}"#,
    );
    let incomplete = write(dir.path(), "if.params", "a_min=0.3\na_max=1.1\n");
    let runs: Vec<(&str, Vec<&str>)> = vec![
        ("3", vec!["scan", "curve", "--map", &add, "--samples", "2000"]),
        ("4", vec!["scan", "curve", "--map", &inc, "--samples", "2000"]),
        ("5", vec!["circle", "rho", "--map", &add, "--seeds", "16"]),
        ("6", vec!["pwmap", "codim2", "--map", &src, "--word-x", "LRL", "--word-y", "RL", "--orbit", "LR", "--orbit", "LLR"]),
        ("7", vec!["model", "if", "scan", "--samples", "400"]),
        ("7b", vec!["model", "if", "scan", "--params", &incomplete, "--samples", "200"]),
        ("8", vec!["model", "planar", "scan", "--samples", "200"]),
    ];
    let mut diffs = Vec::new();
    let mut bytes = 0;
    for (tag, args) in &runs {
        match (cli_csv(args, 1), cli_csv(args, 8)) {
            (Ok(a), Ok(b)) => {
                bytes += a.len();
                if a != b {
                    diffs.push(tag.to_string());
                }
            }
            (Err(e), _) | (_, Err(e)) => diffs.push(format!("{tag}: {e}")),
        }
    }
    verdict(
        diffs.is_empty(),
        if diffs.is_empty() {
            format!("{} CSV outputs identical ({bytes} bytes)", runs.len())
        } else {
            format!("differences: {}", diffs.join(", "))
        },
    )
}

type Criterion = (u32, &'static str, Duration, fn() -> Verdict);

fn main() {
    let criteria: Vec<Criterion> = vec![
        (1, "symbolic exactness", Duration::from_secs(60), symbolic_exactness),
        (2, "worked examples", Duration::from_secs(60), worked_examples),
        (3, "period adding scan", Duration::from_secs(300), period_adding),
        (4, "period incrementing scan", Duration::from_secs(120), period_incrementing),
        (5, "rotation-number contracts", Duration::from_secs(30), rotation_contracts),
        (6, "codim-2 reduction", Duration::from_secs(60), codim2),
        (7, "IF firing number", Duration::from_secs(600), if_model),
        (8, "planar relay quasi-contraction", Duration::from_secs(300), planar_relay),
        (9, "determinism across --jobs", Duration::from_secs(1200), determinism),
    ];
    let mut failed = 0;
    for (id, name, budget, run) in criteria {
        let t = Instant::now();
        let v = run();
        let elapsed = t.elapsed();
        let ok = v.ok && elapsed <= budget;
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {id} [{}] {name}: {} ({:.2} s, budget {} s)",
            if ok { "PASS" } else { "FAIL" },
            v.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
