//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero
//! if any criterion fails.

use std::cell::Cell;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use ceq_core::ce_core::{preprocess, verify_witness, CEInstance, PreprocessOutcome, ProblemTag, RejectReason};
use ceq_core::ff::Field;
use ceq_core::matf::Mat;
use ceq_core::oracle::{decide, generate, rng_for, Decision, GenSpec, Planted, SearchBudget};
use ceq_core::reduction::{reduce_pce, Reduction, ReductionOutcome};
use rand::seq::SliceRandom;
use rand::Rng;


thread_local! {
    static GADGETS: Cell<usize> = const { Cell::new(0) };
    static CANONICAL: Cell<usize> = const { Cell::new(0) };
    static BLOWUP_VIOLATIONS: Cell<usize> = const { Cell::new(0) };
}

/// Every reduction in this suite goes through here so the size identity is
/// checked on all of them.
fn reduce(inst: &CEInstance, target: ProblemTag) -> Reduction {
    let r = reduce_pce(inst, target).expect("PCE input");
    match &r.outcome {
        ReductionOutcome::Gadget { cert, .. } => {
            GADGETS.with(|c| c.set(c.get() + 1));
            let (k, n, m) = (cert.k, cert.n, cert.m);
            let ok = r.instance.n() == n + 2 * n * m + 1
                && r.instance.k() == k + 1
                && r.instance.g().rank() == k + 1
                && r.instance.h().rank() == k + 1
                && cert.check_blowup(&r.instance).is_ok();
            if !ok {
                BLOWUP_VIOLATIONS.with(|c| c.set(c.get() + 1));
            }
        }
        _ => CANONICAL.with(|c| c.set(c.get() + 1)),
    }
    r
}

fn field(q: u32) -> Field {
    match q {
        4 => Field::new(2, 2, None).unwrap(),
        9 => Field::new(3, 2, None).unwrap(),
        256 => Field::new(2, 8, None).unwrap(),
        65536 => Field::new(2, 16, None).unwrap(),
        p => Field::prime(p as u64).unwrap(),
    }
}

/// Random multiplicity profile for `k x n`, or none half of the time.
fn random_profile<R: Rng>(rng: &mut R, q: u32, k: usize, n: usize) -> Option<Vec<usize>> {
    if rng.gen_bool(0.5) {
        return None;
    }
    let available = (q as usize).saturating_pow(k as u32) - 1;
    let lo = k.max(1);
    let hi = n.min(available);
    if lo > hi {
        return None;
    }
    let t = rng.gen_range(lo..=hi);
    let mut counts = vec![1; t];
    for _ in t..n {
        let i = rng.gen_range(0..t);
        counts[i] += 1;
    }
    counts.sort_unstable_by(|a, b| b.cmp(a));
    Some(counts)
}

struct Report {
    failed: bool,
}

impl Report {
    fn line(&mut self, id: u32, title: &str, pass: bool, detail: String) {
        println!("criterion {id} [{}] {title}: {detail}", if pass { "PASS" } else { "FAIL" });
        self.failed |= !pass;
    }
}

fn criterion_1() -> (bool, String) {
    let qs = [2u32, 3, 4, 5, 7, 9];
    let mut passed = 0;
    let mut with_profile = 0;
    for seed in 0..500u64 {
        let mut rng = rng_for(seed, 101);
        let q = qs[rng.gen_range(0..qs.len())];
        let f = field(q);
        let n = rng.gen_range(1..=6);
        let k = rng.gen_range(1..=n.min(4));
        let mut spec = GenSpec::new(&f, k, n, ProblemTag::Pce, Planted::Yes, seed);
        if let Some(p) = random_profile(&mut rng, q, k, n) {
            spec = spec.with_profile(p);
            with_profile += 1;
        }
        let g = generate(&spec).unwrap();
        let w = g.witness.as_ref().unwrap();
        let ok = [ProblemTag::Lce, ProblemTag::Spce].iter().all(|&target| {
            let r = reduce(&g.instance, target);
            r.lift(&g.instance, w).is_ok_and(|lw| verify_witness(&r.instance, &lw).unwrap_or(false))
        });
        passed += ok as usize;
    }
    (passed == 500, format!("{passed}/500 lifted witnesses verify for LCE and SPCE ({with_profile} with a profile hint)"))
}

fn criterion_2() -> (bool, String) {
    let f2 = field(2);
    let budget = SearchBudget::exhaustive().with_max_nodes(50_000_000).with_time_limit(Duration::from_secs(600));
    let (mut no, mut unknown, mut yes) = (0, 0, 0);
    let mut shapes = std::collections::BTreeSet::new();
    let mut seed = 0u64;
    let mut instances = 0;
    while instances < 100 {
        // Full-rank 2x2 codes over F_2 are all equal, so NO instances need k = 1.
        let spec = GenSpec::new(&f2, 1, 2, ProblemTag::Pce, Planted::No, seed);
        seed += 1;
        let Ok(g) = generate(&spec) else { continue };
        instances += 1;
        let r = reduce(&g.instance, ProblemTag::Lce);
        shapes.insert((r.instance.k(), r.instance.n()));
        match decide(&r.instance, &budget) {
            Decision::No => no += 1,
            Decision::Yes(_) => yes += 1,
            Decision::Unknown(_) => unknown += 1,
        }
    }

    // Gadget-reduced NO pairs at q = 2 that survive preprocessing.
    let mut gadget_no = 0;
    let mut gadget_total = 0;
    // At k = 2 every full-rank pair with equal profiles is equivalent, so these start at k = 3.
    let shapes_no: [(usize, usize, Vec<usize>); 4] =
        [(3, 4, vec![1; 4]), (3, 5, vec![2, 1, 1, 1]), (3, 6, vec![2, 2, 1, 1]), (4, 6, vec![1; 6])];
    for seed in 0..40u64 {
        let (k, n, profile) = shapes_no[seed as usize % shapes_no.len()].clone();
        let spec = GenSpec::new(&f2, k, n, ProblemTag::Pce, Planted::No, seed).with_profile(profile);
        let Ok(g) = generate(&spec) else { continue };
        let r = reduce(&g.instance, ProblemTag::Lce);
        if !matches!(r.outcome, ReductionOutcome::Gadget { .. }) {
            continue;
        }
        gadget_total += 1;
        gadget_no += decide(&r.instance, &SearchBudget::backtracking()).is_no() as usize;
    }
    let pass = no == 100 && unknown == 0 && yes == 0 && gadget_no == gadget_total && gadget_total > 0;
    (
        pass,
        format!(
            "{no}/100 reduced NO pairs refuted by the exhaustive oracle, {unknown} unknown, reduced shapes {shapes:?}; \
             {gadget_no}/{gadget_total} gadget pairs (k in 3..=4, n in 4..=6) refuted by backtracking"
        ),
    )
}

fn criterion_3() -> (bool, String) {
    let qs = [2u32, 3, 4, 5];
    let budget = SearchBudget::backtracking().with_time_limit(Duration::from_secs(120));
    let mut passed = 0;
    let mut scaled = 0;
    let mut failures = Vec::new();
    for seed in 0..200u64 {
        let mut rng = rng_for(seed, 303);
        let q = qs[rng.gen_range(0..qs.len())];
        let f = field(q);
        let n = rng.gen_range(1..=4);
        let k = rng.gen_range(1..=n.min(3));
        let mut spec = GenSpec::new(&f, k, n, ProblemTag::Pce, Planted::Yes, seed);
        if let Some(p) = random_profile(&mut rng, q, k, n) {
            spec = spec.with_profile(p);
        }
        let g = generate(&spec).unwrap();
        let r = reduce(&g.instance, ProblemTag::Lce);
        let Decision::Yes(w) = decide(&r.instance, &budget) else {
            failures.push(seed);
            continue;
        };
        scaled += !w.m.is_permutation() as usize;
        match r.extract(&g.instance, &w) {
            Ok(back) if back.m.is_permutation() && verify_witness(&g.instance, &back).unwrap_or(false) => passed += 1,
            _ => failures.push(seed),
        }
    }
    (
        passed == 200,
        format!("{passed}/200 solver witnesses pass the structure checks and extract to verifying witnesses ({scaled} with non-trivial scalars){}", if failures.is_empty() { String::new() } else { format!(", failing seeds {failures:?}") }),
    )
}

fn criterion_5() -> (bool, String) {
    let qs = [2u32, 3, 4, 5];
    let tags = [ProblemTag::Pce, ProblemTag::Spce, ProblemTag::Lce];
    let (mut agree, mut yes, mut witnesses_ok) = (0, 0, 0);
    for seed in 0..300u64 {
        let mut rng = rng_for(seed, 505);
        let q = qs[rng.gen_range(0..qs.len())];
        let f = field(q);
        let n = rng.gen_range(1..=5);
        let k = rng.gen_range(1..=n.min(3));
        let tag = tags[rng.gen_range(0..3)];
        let planted = if rng.gen_bool(0.5) { Planted::Yes } else { Planted::Unlabeled };
        let mut spec = GenSpec::new(&f, k, n, tag, planted, seed);
        if let Some(p) = random_profile(&mut rng, q, k, n) {
            spec = spec.with_profile(p);
        }
        let inst = generate(&spec).unwrap().instance;
        let a = decide(&inst, &SearchBudget::exhaustive());
        let b = decide(&inst, &SearchBudget::backtracking());
        let same = a.answer().is_some() && a.answer() == b.answer();
        agree += same as usize;
        if let (Decision::Yes(wa), Decision::Yes(wb)) = (&a, &b) {
            yes += 1;
            witnesses_ok += (verify_witness(&inst, wa).unwrap_or(false) && verify_witness(&inst, wb).unwrap_or(false)) as usize;
        }
    }
    (agree == 300 && witnesses_ok == yes, format!("{agree}/300 agree ({yes} YES, {witnesses_ok} with both witnesses verifying)"))
}

/// A random small PCE instance with zero columns, dependent rows or a
/// perturbed column mixed in.
fn mutated_instance(seed: u64) -> CEInstance {
    let mut rng = rng_for(seed, 606);
    let q = [2u32, 3, 5][rng.gen_range(0..3)];
    let f = field(q);
    let n = rng.gen_range(1..=4);
    let k = rng.gen_range(1..=n.min(3));
    let planted = if rng.gen_bool(0.6) { Planted::Yes } else { Planted::Unlabeled };
    let base = generate(&GenSpec::new(&f, k, n, ProblemTag::Pce, planted, seed)).unwrap().instance;
    let mut g = base.g().columns();
    let mut h = base.h().columns();
    let zeros = rng.gen_range(0..=2);
    let (zg, zh) = if rng.gen_bool(0.8) { (zeros, zeros) } else { (zeros, (zeros + 1) % 3) };
    for _ in 0..zg {
        let at = rng.gen_range(0..=g.len());
        g.insert(at, vec![ceq_core::ff::Elem::ZERO; k]);
    }
    for _ in 0..zh {
        let at = rng.gen_range(0..=h.len());
        h.insert(at, vec![ceq_core::ff::Elem::ZERO; k]);
    }
    let width = g.len().max(h.len());
    while g.len() < width {
        g.push(h[0].clone());
    }
    while h.len() < width {
        h.push(g[0].clone());
    }
    if rng.gen_bool(0.2) {
        // Duplicate a column on one side only.
        let c = g[rng.gen_range(0..width)].clone();
        let at = rng.gen_range(0..width);
        g[at] = c;
    }
    let mut to_rows = |cols: &[Vec<ceq_core::ff::Elem>]| {
        let m = Mat::from_columns(&f, k, cols);
        let mut rows: Vec<Vec<u64>> = m.to_values().into_iter().map(|r| r.into_iter().map(u64::from).collect()).collect();
        if rng.gen_bool(0.5) {
            let r = rows[rng.gen_range(0..k)].clone();
            let s = rng.gen_range(1..q as u64);
            rows.push(r.iter().map(|x| x * s % q as u64).collect());
            if q == 4 || q == 9 {
                unreachable!("prime fields only");
            }
        }
        rows.shuffle(&mut rng);
        Mat::from_rows(&f, rows.len(), width, &rows).unwrap()
    };
    let gm = to_rows(&g);
    let mut hm = to_rows(&h);
    if hm.rows() != gm.rows() {
        let rows: Vec<Vec<u64>> = (0..gm.rows())
            .map(|r| if r < hm.rows() { hm.row(r).iter().map(|e| e.value() as u64).collect() } else { vec![0; width] })
            .collect();
        hm = Mat::from_rows(&f, gm.rows(), width, &rows).unwrap();
    }
    CEInstance::new(gm, hm, ProblemTag::Pce).unwrap()
}

fn criterion_6() -> (bool, String) {
    let (mut agree, mut normalized, mut rejected, mut rejected_no, mut profile_rejects) = (0, 0, 0, 0, 0);
    for seed in 0..200u64 {
        let inst = mutated_instance(seed);
        let original = decide(&inst, &SearchBudget::exhaustive()).answer();
        match preprocess(&inst) {
            PreprocessOutcome::Normalized { instance, .. } => {
                normalized += 1;
                let stripped = decide(&instance, &SearchBudget::exhaustive()).answer();
                agree += (original.is_some() && original == stripped) as usize;
            }
            PreprocessOutcome::Reject(reason) => {
                rejected += 1;
                profile_rejects += (reason == RejectReason::ProfileMismatch) as usize;
                let confirmed = original == Some(false);
                rejected_no += confirmed as usize;
                agree += confirmed as usize;
            }
            PreprocessOutcome::Unchanged => {}
        }
    }
    (
        agree == 200,
        format!(
            "{agree}/200 agree ({normalized} normalized; {rejected} rejected, {profile_rejects} by profile, {rejected_no} confirmed NO)"
        ),
    )
}

fn criterion_7() -> (bool, String) {
    let mut medians = Vec::new();
    for q in [2u32, 256, 65536] {
        let f = field(q);
        let g = generate(&GenSpec::new(&f, 3, 6, ProblemTag::Pce, Planted::Yes, 7)).unwrap();
        for _ in 0..50 {
            reduce(&g.instance, ProblemTag::Lce);
        }
        let mut times: Vec<Duration> = (0..301)
            .map(|_| {
                let t = Instant::now();
                std::hint::black_box(reduce(std::hint::black_box(&g.instance), ProblemTag::Lce));
                t.elapsed()
            })
            .collect();
        times.sort();
        medians.push((q, times[times.len() / 2]));
    }
    let ratio = medians[2].1.as_secs_f64() / medians[0].1.as_secs_f64();
    let detail = medians.iter().map(|(q, t)| format!("q={q}: {:.1}us", t.as_secs_f64() * 1e6)).collect::<Vec<_>>().join(", ");
    (ratio <= 4.0, format!("median reduction time {detail}; ratio q=2^16 / q=2 = {ratio:.2} (threshold 4)"))
}

fn run_pipeline(dir: &Path) -> Result<(), String> {
    let bin = env!("CARGO_BIN_EXE_ceq");
    let run = |args: &[&str], expect: i32| -> Result<(), String> {
        let out = Command::new(bin).args(args).output().map_err(|e| e.to_string())?;
        match out.status.code() {
            Some(c) if c == expect => Ok(()),
            c => Err(format!("`ceq {}` exited {c:?}: {}", args.join(" "), String::from_utf8_lossy(&out.stderr))),
        }
    };
    let p = |name: &str| dir.join(name).to_string_lossy().into_owned();
    let cases: [(&str, &str, &str, &str, &str); 4] = [
        ("a", "2", "2", "4", "11"),
        ("b", "3", "2", "4", "12"),
        ("c", "2^2", "3", "4", "13"),
        ("d", "5", "1", "3", "14"),
    ];
    for (name, q, k, n, seed) in cases {
        let inst = p(&format!("{name}.ceq"));
        let (red, cert, wit, back) =
            (p(&format!("{name}.red")), p(&format!("{name}.cert")), p(&format!("{name}.sol")), p(&format!("{name}.back")));
        run(&["gen", "--k", k, "--n", n, "--field", q, "--tag", "PCE", "--planted", "yes", "--seed", seed, "--out", &inst], 0)?;
        run(&["reduce", "--in", &inst, "--target", "lce", "--out", &red, "--cert", &cert], 0)?;
        run(&["solve", "--in", &red, "--mode", "backtracking", "--witness-out", &wit], 0)?;
        run(&["extract", "--cert", &cert, "--witness", &wit, "--out", &back], 0)?;
        run(&["lift", "--cert", &cert, "--witness", &format!("{inst}.witness"), "--out", &p(&format!("{name}.lift"))], 0)?;
        run(&["solve", "--in", &inst, "--mode", "exhaustive", "--workers", "3", "--witness-out", &p(&format!("{name}.ex"))], 0)?;
    }
    let inst = p("no.ceq");
    run(&["gen", "--k", "1", "--n", "3", "--field", "3", "--tag", "PCE", "--planted", "no", "--seed", "21", "--out", &inst], 0)?;
    run(&["reduce", "--in", &inst, "--target", "spce", "--out", &p("no.red"), "--cert", &p("no.cert")], 0)?;
    run(&["solve", "--in", &p("no.red"), "--mode", "backtracking"], 1)?;
    Ok(())
}

fn criterion_8() -> (bool, String) {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [a.path(), b.path()] {
        if let Err(e) = run_pipeline(d) {
            return (false, e);
        }
    }
    let mut names: Vec<_> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    let mut identical = 0;
    for name in &names {
        let x = fs::read(a.path().join(name)).unwrap();
        let y = fs::read(b.path().join(name)).ok();
        identical += (Some(x) == y) as usize;
    }
    let other = fs::read_dir(b.path()).unwrap().count();
    (
        identical == names.len() && other == names.len() && !names.is_empty(),
        format!("{identical}/{} files byte-identical across two runs of gen, reduce, solve, lift and extract", names.len()),
    )
}

fn main() {
    // Let `cargo test -- --list` and filters work with a custom harness.
    let args: Vec<String> = std::env::args().collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let start = Instant::now();
    let mut report = Report { failed: false };
    let criteria: [(u32, &str, fn() -> (bool, String)); 6] = [
        (1, "completeness of witness lifting", criterion_1),
        (2, "soundness at q = 2", criterion_2),
        (3, "structure of solver witnesses on reduced pairs", criterion_3),
        (5, "exhaustive and backtracking deciders agree", criterion_5),
        (6, "preprocessing preserves answers", criterion_6),
        (7, "reduction time across field sizes", criterion_7),
    ];
    let mut results = Vec::new();
    for (id, title, run) in criteria {
        let t = Instant::now();
        let (pass, detail) = run();
        results.push((id, title, pass, format!("{detail} [{:.0}ms]", t.elapsed().as_secs_f64() * 1e3)));
        if id == 3 {
            // The size identity covers every reduction run by criteria 1 to 3.
            let (gadgets, canonical, bad) =
                (GADGETS.with(Cell::get), CANONICAL.with(Cell::get), BLOWUP_VIOLATIONS.with(Cell::get));
            results.push((
                4,
                "blowup identity",
                bad == 0 && gadgets > 0,
                format!("{bad} violations in {gadgets} gadget reductions ({canonical} rejected or empty inputs map to fixed pairs)"),
            ));
        }
    }
    let (pass8, detail8) = criterion_8();
    results.push((8, "determinism of the CLI pipeline", pass8, detail8));
    let (gadgets, bad) = (GADGETS.with(Cell::get), BLOWUP_VIOLATIONS.with(Cell::get));
    if let Some(r) = results.iter_mut().find(|r| r.0 == 4) {
        r.2 = bad == 0 && gadgets > 0;
        r.3 = format!("{bad} violations in {gadgets} gadget reductions across the suite");
    }
    results.sort_by_key(|r| r.0);
    for (id, title, pass, detail) in results {
        report.line(id, title, pass, detail);
    }
    println!("acceptance suite finished in {:.1}s", start.elapsed().as_secs_f64());
    if report.failed {
        std::process::exit(1);
    }
}
