//! Built-in numerical verification battery behind `ordmargin check`.
//!
//! Three independent suites cross-examine the numeric core from outside:
//!
//! 1. **Gradient sweep** — central finite differences versus reverse-mode
//!    gradients of the full training objective (encoder, classifier head,
//!    and margin parameters) across several shapes.
//! 2. **Loss oracle** — the graph-built batch objective versus a plain
//!    triple-loop reimplementation written here, sharing no code with the
//!    library's loss path.
//! 3. **Margin additivity** — the separation required between two ranks must
//!    equal the sum over every boundary between them, checked bitwise on a
//!    dyadic grid (where float addition is exact) and to 1e-12 on continuous
//!    random margins.

use ordmargin_core::autodiff::{gradient_check, Graph, Tensor};
use ordmargin_core::loss::batch_objective;
use ordmargin_core::margins::{MarginActivation, MarginMode, MarginNodes, MarginSet, OrdinalSchema};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FD_STEP: f64 = 1e-5;
const FD_TOLERANCE: f64 = 1e-5;
const ORACLE_TOLERANCE: f64 = 1e-10;
const ADDITIVITY_TOLERANCE: f64 = 1e-12;

/// Verdict of one suite.
#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Run every suite; results come back in execution order.
pub fn run_battery(seed: u64) -> Vec<SuiteResult> {
    vec![
        gradient_suite(seed),
        loss_oracle_suite(seed.wrapping_add(1)),
        additivity_suite(seed.wrapping_add(2)),
    ]
}

/// Shapes exercised by the gradient sweep: (input dim, hidden, embed dim,
/// classifier hidden, classes, samples per rank).
const GRADIENT_CONFIGS: [(usize, usize, usize, usize, usize, usize); 6] = [
    (3, 5, 4, 4, 3, 2),
    (4, 6, 4, 5, 4, 2),
    (2, 4, 6, 4, 3, 3),
    (5, 5, 3, 3, 5, 2),
    (3, 8, 5, 4, 4, 2),
    (4, 4, 4, 6, 3, 2),
];

fn gradient_suite(seed: u64) -> SuiteResult {
    let mut worst = 0.0f64;
    for (index, &(input, hidden, embed, chidden, classes, per_rank)) in
        GRADIENT_CONFIGS.iter().enumerate()
    {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(index as u64));
        let schema = match OrdinalSchema::from_class_count(classes) {
            Ok(schema) => schema,
            Err(err) => return fail("gradient sweep", format!("schema: {err}")),
        };
        let margins = match MarginSet::init(
            &schema,
            MarginMode::PerPair,
            MarginActivation::Softplus,
            0.0,
            (0.5, 1.0),
            &mut rng,
        ) {
            Ok(margins) => margins,
            Err(err) => return fail("gradient sweep", format!("margins: {err}")),
        };
        let n = classes * per_rank;
        let ranks: Vec<usize> = (1..=classes).flat_map(|c| [c].repeat(per_rank)).collect();
        let features: Vec<f64> = (0..n * input).map(|_| rng.gen_range(-1.2..1.2)).collect();
        let params = vec![
            signed_tensor(&mut rng, vec![input, hidden]),
            signed_tensor(&mut rng, vec![hidden]),
            signed_tensor(&mut rng, vec![hidden, embed]),
            signed_tensor(&mut rng, vec![embed]),
            signed_tensor(&mut rng, vec![embed, chidden]),
            signed_tensor(&mut rng, vec![chidden]),
            signed_tensor(&mut rng, vec![chidden, classes]),
            signed_tensor(&mut rng, vec![classes]),
            Tensor::param(margins.raw().to_vec(), vec![margins.raw().len()])
                .expect("raw margin shape"),
        ];
        let margins_for_build = margins.clone();
        let ranks_for_build = ranks.clone();
        let report = gradient_check(&params, FD_STEP, FD_TOLERANCE, move |g, ids| {
            let x = g.constant(features.clone(), vec![n, input])?;
            let h = g.matmul(x, ids[0])?;
            let h = g.add_row(h, ids[1])?;
            let h = g.relu(h);
            let z = g.matmul(h, ids[2])?;
            let z = g.add_row(z, ids[3])?;
            let c = g.matmul(z, ids[4])?;
            let c = g.add_row(c, ids[5])?;
            let c = g.relu(c);
            let logits = g.matmul(c, ids[6])?;
            let logits = g.add_row(logits, ids[7])?;
            let soft = g.softplus(ids[8]);
            let activated = g.add_scalar(soft, margins_for_build.rho());
            let nodes = MarginNodes {
                activated,
                raw: Some(ids[8]),
            };
            let parts = batch_objective(
                g,
                z,
                logits,
                &ranks_for_build,
                &margins_for_build,
                &nodes,
                1.0,
            )?;
            Ok(parts.total)
        });
        match report {
            Ok(report) => {
                worst = worst.max(report.max_relative_error);
                if !report.passed() {
                    return fail(
                        "gradient sweep",
                        format!(
                            "config {index}: max relative error {:.3e} exceeds {:.0e}",
                            report.max_relative_error, FD_TOLERANCE
                        ),
                    );
                }
            }
            Err(err) => return fail("gradient sweep", format!("config {index}: {err}")),
        }
    }
    SuiteResult {
        name: "gradient sweep",
        passed: true,
        detail: format!(
            "{} configurations, max relative error {worst:.3e} (tolerance {FD_TOLERANCE:.0e})",
            GRADIENT_CONFIGS.len()
        ),
    }
}

fn loss_oracle_suite(seed: u64) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for round in 0..20 {
        let classes = rng.gen_range(3..=5usize);
        let dim = rng.gen_range(2..=6usize);
        let per_rank = rng.gen_range(2..=3usize);
        let weight = [0.0, 0.5, 1.0, 2.0][round % 4];
        let n = classes * per_rank;
        let ranks: Vec<usize> = (1..=classes).flat_map(|c| [c].repeat(per_rank)).collect();
        let embeddings: Vec<f64> = (0..n * dim)
            .map(|_| {
                let v: f64 = rng.gen_range(0.3..1.5);
                if rng.gen_bool(0.5) {
                    v
                } else {
                    -v
                }
            })
            .collect();
        let logits: Vec<f64> = (0..n * classes).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let schema = match OrdinalSchema::from_class_count(classes) {
            Ok(schema) => schema,
            Err(err) => return fail("loss oracle", format!("schema: {err}")),
        };
        let margins = match MarginSet::init(
            &schema,
            MarginMode::PerPair,
            MarginActivation::Softplus,
            0.1,
            (0.3, 1.2),
            &mut rng,
        ) {
            Ok(margins) => margins,
            Err(err) => return fail("loss oracle", format!("margins: {err}")),
        };

        let mut graph = Graph::new();
        let graph_total = (|| -> ordmargin_core::Result<f64> {
            let nodes = margins.graph_leaves(&mut graph, false)?;
            let z = graph.constant(embeddings.clone(), vec![n, dim])?;
            let l = graph.constant(logits.clone(), vec![n, classes])?;
            let parts = batch_objective(&mut graph, z, l, &ranks, &margins, &nodes, weight)?;
            Ok(graph.scalar_value(parts.total))
        })();
        let graph_total = match graph_total {
            Ok(total) => total,
            Err(err) => return fail("loss oracle", format!("round {round}: {err}")),
        };

        let reference =
            reference_objective(&embeddings, &logits, &ranks, &margins.activated(), dim, classes, weight);
        let gap = (graph_total - reference).abs();
        worst = worst.max(gap);
        if gap >= ORACLE_TOLERANCE {
            return fail(
                "loss oracle",
                format!("round {round}: graph {graph_total} vs reference {reference}"),
            );
        }
    }
    SuiteResult {
        name: "loss oracle",
        passed: true,
        detail: format!("20 batches, max gap {worst:.3e} (tolerance {ORACLE_TOLERANCE:.0e})"),
    }
}

fn additivity_suite(seed: u64) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut continuous_worst = 0.0f64;
    for round in 0..25 {
        let classes = rng.gen_range(3..=8usize);
        let schema = match OrdinalSchema::from_class_count(classes) {
            Ok(schema) => schema,
            Err(err) => return fail("margin additivity", format!("schema: {err}")),
        };

        // Dyadic grid: values k/1024 sum without rounding, so additivity must
        // hold bitwise for every split point of every rank pair.
        let mut dyadic = match MarginSet::all_fixed(&schema, 1.0, 0.0) {
            Ok(margins) => margins,
            Err(err) => return fail("margin additivity", format!("margins: {err}")),
        };
        for h in 1..=schema.n_boundaries() {
            let value = f64::from(rng.gen_range(1..=2048u16)) / 1024.0;
            if let Err(err) = dyadic.set_fixed_override(h, value) {
                return fail("margin additivity", format!("override: {err}"));
            }
        }
        for low in 1..=classes {
            for mid in (low + 1)..=classes {
                for high in (mid + 1)..=classes {
                    let whole = dyadic.cumulative(low, high).expect("valid ranks");
                    let left = dyadic.cumulative(low, mid).expect("valid ranks");
                    let right = dyadic.cumulative(mid, high).expect("valid ranks");
                    if whole != left + right {
                        return fail(
                            "margin additivity",
                            format!(
                                "round {round}: dyadic split {low}-{mid}-{high}: {whole} != {left} + {right}"
                            ),
                        );
                    }
                }
            }
        }

        // Continuous margins: float association noise only.
        let continuous = match MarginSet::init(
            &schema,
            MarginMode::PerPair,
            MarginActivation::Softplus,
            0.0,
            (0.2, 1.4),
            &mut rng,
        ) {
            Ok(margins) => margins,
            Err(err) => return fail("margin additivity", format!("margins: {err}")),
        };
        for low in 1..=classes {
            for mid in (low + 1)..=classes {
                for high in (mid + 1)..=classes {
                    let whole = continuous.cumulative(low, high).expect("valid ranks");
                    let split = continuous.cumulative(low, mid).expect("valid ranks")
                        + continuous.cumulative(mid, high).expect("valid ranks");
                    let gap = (whole - split).abs();
                    continuous_worst = continuous_worst.max(gap);
                    if gap >= ADDITIVITY_TOLERANCE {
                        return fail(
                            "margin additivity",
                            format!("round {round}: split {low}-{mid}-{high} off by {gap:e}"),
                        );
                    }
                }
            }
        }
    }
    SuiteResult {
        name: "margin additivity",
        passed: true,
        detail: format!(
            "25 schemas, dyadic splits bitwise, continuous max gap {continuous_worst:.3e}"
        ),
    }
}

fn fail(name: &'static str, detail: String) -> SuiteResult {
    SuiteResult {
        name,
        passed: false,
        detail,
    }
}

fn signed_tensor(rng: &mut ChaCha8Rng, shape: Vec<usize>) -> Tensor {
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let magnitude = rng.gen_range(0.2..1.2);
            if rng.gen_bool(0.5) {
                magnitude
            } else {
                -magnitude
            }
        })
        .collect();
    Tensor::param(data, shape).expect("shape matches data")
}

// ---- plain-loop objective reference (independent of the library's loss) ----

fn reference_objective(
    embeddings: &[f64],
    logits: &[f64],
    ranks: &[usize],
    activated_margins: &[f64],
    dim: usize,
    classes: usize,
    weight: f64,
) -> f64 {
    let n = ranks.len();
    let mut total = 0.0;
    for anchor in 0..n {
        let ce = cross_entropy(&logits[anchor * classes..(anchor + 1) * classes], ranks[anchor] - 1);
        let mut hinge_sum = 0.0;
        for positive in 0..n {
            if positive == anchor || ranks[positive] != ranks[anchor] {
                continue;
            }
            for negative in 0..n {
                if ranks[negative] == ranks[anchor] {
                    continue;
                }
                let margin = cumulative_margin(activated_margins, ranks[anchor], ranks[negative]);
                let pull = cosine(
                    &embeddings[anchor * dim..(anchor + 1) * dim],
                    &embeddings[positive * dim..(positive + 1) * dim],
                );
                let push = cosine(
                    &embeddings[anchor * dim..(anchor + 1) * dim],
                    &embeddings[negative * dim..(negative + 1) * dim],
                );
                hinge_sum += (margin + push - pull).max(0.0);
            }
        }
        total += ce + weight * hinge_sum;
    }
    total / n as f64
}

fn cumulative_margin(activated: &[f64], rank_a: usize, rank_b: usize) -> f64 {
    let (low, high) = if rank_a < rank_b {
        (rank_a, rank_b)
    } else {
        (rank_b, rank_a)
    };
    activated[low - 1..high - 1].iter().sum()
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln() + max;
    log_sum - logits[label]
}
