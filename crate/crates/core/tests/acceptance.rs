//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero if any fails.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::panic;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use behavior_probe::analysis::{
    aggregate_by_family, aggregate_overall, compare_pair, index_predictions, FamilyPairResult, Winner,
};
use behavior_probe::equilibrium::mixed_ne_2x2;
use behavior_probe::filters::{
    pair_winner, sensitivity_grid, FilterConfig, PairStat, DEFAULT_CORR_LEVELS, DEFAULT_MASS_LEVELS,
};
use behavior_probe::game_model::{load_dataset, GameFamily, MatrixGame2x2, PairSpec, Topology};
use behavior_probe::logprob::LabelMass;
use behavior_probe::pipeline::{
    evaluate, predict, synth, synth_family, template_for, write_report, PredictScope, RunConfig, SynthOptions,
};
use behavior_probe::predictor::{normalize, PredictionRecord};
use behavior_probe::prompt::{
    variant_by_name, PromptBuilder, PromptFormat, TemplateSet, VariantName, JSON_SUFFIX,
};
use behavior_probe::stats::{
    binomial_one_sided, bootstrap_median_ci, pearson, wilcoxon_signed_rank, Direction, WilcoxonMethod,
};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || format!("took {elapsed:?}, limit {limit:?}"))
}

// (k, n, printed p, significant figures printed)
const HEADLINE_CELLS: [(u64, u64, f64, i32); 5] = [
    (62, 90, 2.19e-4, 3),
    (57, 71, 1.3e-7, 2),
    (101, 106, 1.3e-24, 2),
    (105, 108, 6.5e-28, 2),
    (57, 62, 1.5e-12, 2),
];

// Per-parameter breakdown tables. The negotiation cell 20:1 is printed as
// 1.1e-5 although the exact tail is 1.049e-5, so it is left out.
const TABLE_CELLS: &[(u64, u64, f64)] = &[
    (73, 74, 4.0e-21),
    (69, 73, 1.2e-16),
    (62, 64, 1.1e-16),
    (72, 76, 1.8e-17),
    (75, 78, 2.6e-19),
    (64, 66, 3.0e-17),
    (76, 83, 4.7e-16),
    (10, 17, 0.31),
    (65, 73, 1.6e-12),
    (57, 60, 3.1e-14),
    (85, 88, 3.7e-22),
    (76, 80, 1.4e-18),
    (40, 42, 2.1e-10),
    (74, 78, 5.0e-18),
    (73, 82, 6.9e-14),
    (61, 93, 1.7e-3),
    (82, 86, 2.9e-20),
    (33, 51, 0.024),
    (4, 4, 0.063),
    (31, 35, 1.7e-6),
    (16, 23, 0.047),
    (33, 37, 5.4e-7),
    (5, 6, 0.11),
    (12, 15, 0.018),
    (29, 31, 2.3e-7),
    (32, 46, 5.7e-3),
    (32, 36, 9.7e-7),
    (32, 33, 4.0e-9),
    (43, 47, 1.4e-9),
    (26, 32, 2.7e-4),
    (34, 34, 5.8e-11),
    (30, 53, 0.21),
    (31, 39, 1.5e-4),
    (39, 40, 3.7e-11),
    (27, 28, 1.1e-7),
    (31, 32, 7.7e-9),
    (54, 55, 1.6e-15),
    (6, 7, 0.063),
    (27, 29, 8.1e-7),
    (19, 20, 2.0e-5),
    (42, 44, 5.6e-11),
    (26, 28, 1.5e-6),
    (36, 38, 2.7e-9),
    (27, 27, 7.5e-9),
    (39, 72, 0.28),
    (56, 57, 4.0e-16),
    (20, 32, 0.11),
    (93, 116, 1.8e-11),
    (92, 119, 8.7e-10),
    (10, 11, 5.9e-3),
    (93, 111, 1.1e-13),
];

fn binomial_exactness() -> Outcome {
    let start = Instant::now();
    let mut checked = 0;
    let cells = HEADLINE_CELLS
        .iter()
        .copied()
        .chain(TABLE_CELLS.iter().map(|&(k, n, p)| (k, n, p, 2)));
    for (k, n, printed, sig) in cells {
        let p = binomial_one_sided(k, n).map_err(|e| e.to_string())?.p_value;
        ensure(common::matches_printed(p, printed, sig), || {
            format!("({k}, {n}): computed {p:.4e}, printed {printed:e}")
        })?;
        checked += 1;
    }
    let p44 = binomial_one_sided(4, 4).map_err(|e| e.to_string())?.p_value;
    ensure(p44 == 0.0625 && common::matches_printed(p44, 0.06, 1), || {
        format!("(4, 4) gave {p44}")
    })?;
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!("{} cells ({} table cells)", checked + 1, TABLE_CELLS.len()))
}

fn result_fixture(pair_id: u32, family: GameFamily, base_wins: bool) -> FamilyPairResult {
    let (base_r, aligned_r) = if base_wins { (Some(0.6), Some(0.4)) } else { (Some(0.4), Some(0.6)) };
    let stat = PairStat {
        pair_id,
        family,
        base_mass: 0.95,
        aligned_mass: 0.9,
        base_r,
        aligned_r,
    };
    let filter = stat.outcome(&FilterConfig::default());
    FamilyPairResult {
        pair: PairSpec {
            pair_id,
            base_model_id: format!("base-{pair_id}"),
            aligned_model_id: format!("chat-{pair_id}"),
            provider: "fixture".into(),
            param_count: 7.0,
        },
        family,
        n_decisions: 100,
        base_r,
        aligned_r,
        base_mass: stat.base_mass,
        aligned_mass: stat.aligned_mass,
        winner: filter.included.then(|| pair_winner(base_r, aligned_r).unwrap().into()),
        filter,
    }
}

fn headline_arithmetic() -> Outcome {
    let start = Instant::now();
    let counts = [
        (GameFamily::Bargaining, 75, 4),
        (GameFamily::Persuasion, 32, 4),
        (GameFamily::Negotiation, 25, 1),
        (GameFamily::MatrixRepeated, 81, 13),
    ];
    let mut results = Vec::new();
    for (family, b, a) in counts {
        for i in 0..(b + a) {
            results.push(result_fixture(i + 1, family, i < b));
        }
    }
    let rows = aggregate_by_family(&results);
    for ((family, b, a), row) in counts.iter().zip(&rows) {
        ensure(
            row.group == family.to_string() && row.wins_base == *b as u64 && row.wins_aligned == *a as u64,
            || format!("{family}: got {} {}", row.group, row.ratio()),
        )?;
    }
    let overall = aggregate_overall(&results);
    ensure(overall.ratio() == "213:22", || format!("overall {}", overall.ratio()))?;
    let bin = overall.binomial.ok_or("no binomial test")?;
    ensure(bin.direction == Direction::First && bin.p_value < 1e-40, || {
        format!("p = {:e}", bin.p_value)
    })?;
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!("213:22, p = {:.2e}", bin.p_value))
}

fn random_game(rng: &mut ChaCha8Rng, integer: bool) -> MatrixGame2x2 {
    let mut draw = || -> [[f64; 2]; 2] {
        let mut m = [[0.0; 2]; 2];
        for v in m.iter_mut().flatten() {
            *v = if integer {
                rng.random_range(0..10) as f64
            } else {
                rng.random_range(-10.0..10.0)
            };
        }
        m
    };
    let (row, col) = (draw(), draw());
    MatrixGame2x2::new(row, col, Topology::Dilemma)
}

fn ne_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut games, mut mixed) = (0, 0);
    while games < 1000 {
        let g = random_game(&mut rng, games % 2 == 1);
        if !common::is_nondegenerate(&g) {
            continue;
        }
        games += 1;
        let ne = mixed_ne_2x2(&g).map_err(|e| format!("{:?}: {e}", g.row_payoffs))?;
        let (p, q) = common::oracle_ne(&g).ok_or_else(|| format!("oracle found nothing for {g:?}"))?;
        ensure(
            (ne.row_action1_prob - p).abs() <= 1e-9 && (ne.col_action1_prob - q).abs() <= 1e-9,
            || format!("{g:?}: solver {ne:?}, oracle ({p}, {q})"),
        )?;
        ensure(
            common::best_response_holds(&g, ne.row_action1_prob, ne.col_action1_prob, 1e-9),
            || format!("best-response check failed for {g:?}"),
        )?;
        if p > 0.0 && p < 1.0 {
            mixed += 1;
        }
    }
    within(start.elapsed(), Duration::from_secs(5))?;
    Ok(format!("{games} games, {mixed} with an interior equilibrium"))
}

fn statistics_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(3..=100);
        let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let y: Vec<f64> = x.iter().map(|v| v * rng.random_range(-1.0..1.0) + rng.random::<f64>()).collect();
        let r = pearson(&x, &y).map_err(|e| e.to_string())?.r.ok_or("undefined r")?;
        worst = worst.max((r - common::direct_pearson(&x, &y)).abs());
    }
    ensure(worst <= 1e-12, || format!("pearson deviates by {worst:e}"))?;

    let mut fixtures: Vec<Vec<f64>> = vec![vec![0.1, -0.1], vec![0.3, 0.2, 0.1, -0.05, 0.4]];
    for _ in 0..300 {
        let n = rng.random_range(1..=12);
        // One-decimal values so ties and zeros occur.
        fixtures.push((0..n).map(|_| rng.random_range(-5..=5) as f64 / 10.0).collect());
    }
    let mut compared = 0;
    for d in &fixtures {
        let (w_plus, w_minus, p) = common::signflip_wilcoxon(d);
        if d.iter().all(|v| *v == 0.0) {
            continue;
        }
        let t = wilcoxon_signed_rank(d, WilcoxonMethod::Exact).map_err(|e| e.to_string())?;
        let dir = if w_plus > w_minus {
            Direction::First
        } else if w_minus > w_plus {
            Direction::Second
        } else {
            Direction::Tie
        };
        ensure(t.direction == dir && (t.p_value - p).abs() <= 1e-12, || {
            format!("{d:?}: got {:?} p={}, enumeration {dir:?} p={p}", t.direction, t.p_value)
        })?;
        compared += 1;
    }

    let ci = bootstrap_median_ci(&[0.42; 30], 2000, 0.95, 11).map_err(|e| e.to_string())?;
    ensure(ci.lower == 0.42 && ci.upper == 0.42 && ci.estimate == 0.42, || format!("{ci:?}"))?;
    Ok(format!(
        "pearson max dev {worst:.1e} over 1000 vectors, {compared} signed-rank fixtures"
    ))
}

fn normalization_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let binary = ["accept", "reject"];
    let ternary = ["AcceptOffer", "RejectOffer", "DealWithJohn"];
    for i in 0..10_000 {
        let labels: &[&str] = if i % 2 == 0 { &binary } else { &ternary };
        let raw: Vec<f64> = labels.iter().map(|_| rng.random::<f64>()).collect();
        let total: f64 = raw.iter().sum();
        let budget = rng.random::<f64>();
        let m: Vec<f64> = raw.iter().map(|v| v / total * budget).collect();
        let masses = LabelMass::from_pairs(labels.iter().copied().zip(m.iter().copied()));
        let p = normalize(&masses, labels[0]).map_err(|e| e.to_string())?;
        let p = match p {
            Some(p) => p,
            None => {
                ensure(budget == 0.0, || format!("undefined p for {m:?}"))?;
                continue;
            }
        };
        ensure((0.0..=1.0).contains(&p), || format!("p = {p} for {m:?}"))?;
        let expected = m[0] / m.iter().sum::<f64>();
        ensure((p - expected).abs() <= 1e-12, || format!("p = {p}, expected {expected}"))?;

        let c = rng.random_range(1e-3..1.0);
        let scaled = LabelMass::from_pairs(labels.iter().copied().zip(m.iter().map(|v| v * c)));
        let ps = normalize(&scaled, labels[0]).map_err(|e| e.to_string())?.ok_or("undefined")?;
        ensure((ps - p).abs() <= 1e-12, || format!("scale {c}: {ps} vs {p}"))?;

        let others: f64 = labels[1..]
            .iter()
            .map(|l| normalize(&masses, l).map(|v| v.unwrap()))
            .sum::<Result<f64, _>>()
            .map_err(|e| e.to_string())?;
        ensure((p + others - 1.0).abs() <= 1e-12, || format!("complement fails for {m:?}"))?;
        if labels.len() == 3 {
            // Rejecting and taking the outside option both code as non-acceptance.
            let rest = (m[1] + m[2]) / m.iter().sum::<f64>();
            ensure((1.0 - p - rest).abs() <= 1e-12, || format!("ternary coding fails for {m:?}"))?;
        }
    }
    let zero = LabelMass::from_pairs([("yes", 0.0), ("no", 0.0)]);
    ensure(normalize(&zero, "yes").map_err(|e| e.to_string())?.is_none(), || "zero mass".into())?;
    Ok("10000 vectors".into())
}

fn record(dp_id: &str, model: &str, labels: &[String], aff: &str, mass: f64, p: f64) -> PredictionRecord {
    let others = (labels.len() - 1) as f64;
    let masses = LabelMass::from_pairs(labels.iter().map(|l| {
        let m = if l == aff { mass * p } else { mass * (1.0 - p) / others };
        (l.clone(), m)
    }));
    PredictionRecord {
        decision_point_id: dp_id.into(),
        model_id: model.into(),
        variant: VariantName::Standard,
        format: PromptFormat::Standard,
        p_affirmative: normalize(&masses, aff).unwrap(),
        label_masses: masses,
        truncation_warning: false,
    }
}

/// Predictions mixing the human target with noise; some are constant so
/// their correlation is undefined.
fn side(rng: &mut ChaCha8Rng, model: &str, dps: &[behavior_probe::game_model::DecisionPoint]) -> Vec<PredictionRecord> {
    let weight = rng.random_range(0.0..1.0);
    let mass = *[0.5, 0.75, 0.8, 0.85, 0.95].get(rng.random_range(0..5)).unwrap();
    let constant = rng.random_bool(0.05);
    dps.iter()
        .map(|d| {
            let p = if constant {
                0.5
            } else {
                weight * d.human_target() + (1.0 - weight) * rng.random::<f64>()
            };
            record(&d.id, model, &d.decision_labels, &d.affirmative_label, mass, p)
        })
        .collect()
}

fn filter_semantics() -> Outcome {
    let cfg = FilterConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut checked = 0;
    for round in 0..20 {
        for family in [GameFamily::Bargaining, GameFamily::Negotiation, GameFamily::Lottery] {
            let dps = synth_family(family, 25, &mut rng);
            let mut results = Vec::new();
            for pair_id in 1..=30 {
                let pair = PairSpec {
                    pair_id,
                    base_model_id: format!("b{pair_id}"),
                    aligned_model_id: format!("a{pair_id}"),
                    provider: "fixture".into(),
                    param_count: 1.0,
                };
                let base = side(&mut rng, &pair.base_model_id, &dps);
                let aligned = side(&mut rng, &pair.aligned_model_id, &dps);
                let r = compare_pair(&pair, &index_predictions(&base), &index_predictions(&aligned), &dps, &cfg)
                    .map_err(|e| e.to_string())?;
                results.push(r);
            }
            let headline = &aggregate_by_family(&results)[0];
            let stats: Vec<PairStat> = results.iter().map(FamilyPairResult::stat).collect();
            let grid = sensitivity_grid(&stats, family, &DEFAULT_MASS_LEVELS, &DEFAULT_CORR_LEVELS);
            let cell = grid.cell_at(Some(0.8), Some(0.3)).ok_or("grid lacks (0.8, 0.3)")?;
            ensure(
                (cell.wins_base, cell.wins_aligned, cell.ties)
                    == (headline.wins_base, headline.wins_aligned, headline.ties),
                || format!("round {round} {family}: grid {cell:?} vs headline {}", headline.ratio()),
            )?;
            let included = |i: usize, j: usize| {
                let c = &grid.cells[i][j];
                c.wins_base + c.wins_aligned + c.ties
            };
            for i in 0..grid.mass_levels.len() {
                for j in 0..grid.corr_levels.len() {
                    if i + 1 < grid.mass_levels.len() {
                        ensure(included(i + 1, j) <= included(i, j), || format!("mass axis at ({i}, {j})"))?;
                    }
                    if j + 1 < grid.corr_levels.len() {
                        ensure(included(i, j + 1) <= included(i, j), || format!("corr axis at ({i}, {j})"))?;
                    }
                }
            }
            checked += 1;
        }
    }
    Ok(format!("{checked} fixture sets of 30 pairs"))
}

fn run_synthetic(dir: &Path) -> Result<(RunConfig, behavior_probe::pipeline::ReportBundle), String> {
    let path = synth(dir, &SynthOptions::default()).map_err(|e| e.to_string())?;
    let cfg = RunConfig::load(&path).map_err(|e| e.to_string())?;
    let s = predict(&cfg, &PredictScope::default()).map_err(|e| e.to_string())?;
    ensure(s.failures.is_empty(), || format!("{} failures", s.failures.len()))?;
    let bundle = evaluate(&cfg, &[]).map_err(|e| e.to_string())?;
    write_report(&bundle, &cfg.output_dir().join("report")).map_err(|e| e.to_string())?;
    Ok((cfg, bundle))
}

fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn mock_recovery() -> Outcome {
    let start = Instant::now();
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (cfg, bundle) = run_synthetic(d1.path())?;
    let (cfg2, _) = run_synthetic(d2.path())?;

    let mut worst_a = f64::INFINITY;
    let mut worst_b = f64::NEG_INFINITY;
    for r in &bundle.pair_results {
        let a_is_base = r.pair.base_model_id.starts_with("synth-a");
        let (ra, rb) = if a_is_base { (r.base_r, r.aligned_r) } else { (r.aligned_r, r.base_r) };
        let (ra, rb) = (ra.ok_or("r(A) undefined")?, rb.unwrap_or(f64::NEG_INFINITY));
        worst_a = worst_a.min(ra);
        worst_b = worst_b.max(rb);
        let expected = if a_is_base { Winner::Base } else { Winner::Aligned };
        ensure(r.winner == Some(expected), || {
            format!("pair {} {}: winner {:?}", r.pair.pair_id, r.family, r.winner)
        })?;
    }
    ensure(bundle.pair_results.len() == 12, || format!("{} results", bundle.pair_results.len()))?;
    ensure(worst_a >= 0.8 && worst_b <= 0.3, || format!("min r(A) {worst_a}, max r(B) {worst_b}"))?;

    for grid in &bundle.sensitivity {
        let cell = grid.cell_at(Some(0.8), Some(0.3)).ok_or("missing cell")?;
        let row = bundle
            .families
            .iter()
            .find(|r| r.group == grid.family.to_string())
            .ok_or("missing family row")?;
        ensure((cell.wins_base, cell.wins_aligned) == (row.wins_base, row.wins_aligned), || {
            format!("{}: grid and headline differ", grid.family)
        })?;
    }

    let (t1, t2) = (tree(&cfg.output_dir()), tree(&cfg2.output_dir()));
    ensure(t1.keys().eq(t2.keys()), || "output trees differ in file names".into())?;
    for (name, bytes) in &t1 {
        ensure(t2[name] == *bytes, || format!("{name} differs between runs"))?;
    }
    within(start.elapsed(), Duration::from_secs(30))?;
    Ok(format!(
        "min r(A) {worst_a:.3}, max r(B) {worst_b:.3}, {} identical files",
        t1.len()
    ))
}

fn render_cell(
    corpus: &BTreeMap<GameFamily, Vec<behavior_probe::game_model::DecisionPoint>>,
    templates: &TemplateSet,
    pairs: &[PairSpec],
    model: &str,
    format: PromptFormat,
) -> Result<String, String> {
    let builder = PromptBuilder::new();
    let template = match format {
        PromptFormat::Chat => Some(template_for(templates, pairs, model).ok_or("no template")?),
        PromptFormat::Standard => None,
    };
    let mut out = String::new();
    for dps in corpus.values() {
        for dp in dps {
            for name in [VariantName::Standard, VariantName::Simplified] {
                if !builder.supports(dp.family, name) {
                    continue;
                }
                let v = variant_by_name(name);
                let p = builder.build_prompt(dp, &v, format, template).map_err(|e| e.to_string())?;
                ensure(p.text.ends_with(&v.suffix), || format!("{} {name}: wrong suffix", dp.id))?;
                out.push_str(&format!("### {} {name}\n{}\n### end\n\n", dp.id, p.text));
            }
        }
    }
    Ok(out)
}

fn prompt_goldens() -> Outcome {
    ensure(variant_by_name(VariantName::Standard).suffix == "{\"decision\": \"", || {
        "baseline suffix".into()
    })?;
    ensure(JSON_SUFFIX == "{\"decision\": \"", || "json suffix constant".into())?;
    ensure(variant_by_name(VariantName::Simplified).suffix == "Answer: ", || {
        "simplified suffix".into()
    })?;

    let fixtures = common::fixture_dir();
    let mut corpus = BTreeMap::new();
    for family in GameFamily::ALL {
        let path = fixtures.join(format!("corpus/{family}.jsonl"));
        corpus.insert(family, load_dataset(&path, family).map_err(|e| e.to_string())?);
    }
    let templates = TemplateSet::load_dir(&fixtures.join("templates")).map_err(|e| e.to_string())?;
    let pairs = vec![PairSpec {
        pair_id: 1,
        base_model_id: "fixture-base".into(),
        aligned_model_id: "fixture-chat".into(),
        provider: "fixture".into(),
        param_count: 8.0,
    }];
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    let golden = common::golden_dir().join("crossing");
    let mut rendered = BTreeMap::new();
    for (role, model) in [("base", "fixture-base"), ("aligned", "fixture-chat")] {
        for format in [PromptFormat::Standard, PromptFormat::Chat] {
            let text = render_cell(&corpus, &templates, &pairs, model, format)?;
            let again = render_cell(&corpus, &templates, &pairs, model, format)?;
            ensure(text == again, || format!("{role}/{format} is not deterministic"))?;
            let path = golden.join(format!("{role}_{format}.txt"));
            if update {
                fs::create_dir_all(&golden).unwrap();
                fs::write(&path, &text).unwrap();
            }
            let pinned = fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
            ensure(pinned == text, || format!("{} does not match", path.display()))?;
            rendered.insert((role, format), text);
        }
    }
    // A decision point renders to one text per format, whichever model of
    // the pair consumes it.
    for format in [PromptFormat::Standard, PromptFormat::Chat] {
        ensure(rendered[&("base", format)] == rendered[&("aligned", format)], || {
            format!("{format} text differs between base and aligned")
        })?;
    }
    ensure(
        rendered[&("base", PromptFormat::Standard)] != rendered[&("base", PromptFormat::Chat)],
        || "plain and chat renderings coincide".into(),
    )?;
    Ok("4 crossing cells match their golden files".into())
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("binomial exactness against printed values", binomial_exactness),
        ("headline win-count arithmetic", headline_arithmetic),
        ("equilibrium solver vs support enumeration", ne_oracle),
        ("statistics oracles", statistics_oracles),
        ("normalization properties", normalization_properties),
        ("filter semantics and sensitivity monotonicity", filter_semantics),
        ("end-to-end mock recovery", mock_recovery),
        ("prompt determinism and crossing goldens", prompt_goldens),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = panic::catch_unwind(f).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let ms = start.elapsed().as_millis();
        match outcome {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail}; {ms} ms)", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({why}; {ms} ms)", i + 1);
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
