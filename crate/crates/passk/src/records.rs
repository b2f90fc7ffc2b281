//! Data model and ingestion for per-problem outcome pools and
//! success/attempt tallies.
//!
//! Input is line-delimited JSON, one problem per line:
//!
//! - outcomes mode: `{"problem_id": "p1", "outcomes": [1, 0, 1]}`
//! - counts mode: `{"problem_id": "p1", "successes": 2, "attempts": 3}`

use std::collections::HashSet;
use std::io::BufRead;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{fnv1a, mix_seed};

/// A problem's full recorded attempt history, in storage order.
/// Immutable once loaded; replay order is fixed by a seeded shuffle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutcomePool {
    problem_id: String,
    outcomes: Vec<bool>,
}

impl OutcomePool {
    pub fn new(problem_id: impl Into<String>, outcomes: Vec<bool>) -> Result<Self> {
        let problem_id = problem_id.into();
        if outcomes.is_empty() {
            return Err(Error::EmptyPool { id: problem_id });
        }
        Ok(Self {
            problem_id,
            outcomes,
        })
    }

    pub fn problem_id(&self) -> &str {
        &self.problem_id
    }

    pub fn outcomes(&self) -> &[bool] {
        &self.outcomes
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn successes(&self) -> u64 {
        self.outcomes.iter().filter(|&&o| o).count() as u64
    }

    /// The pool's outcomes permuted by the per-problem shuffle stream.
    ///
    /// The stream is seeded by (global seed, hash of problem id), so a
    /// problem's replay order never depends on which other problems are
    /// loaded alongside it.
    pub fn shuffled(&self, seed: u64) -> Vec<bool> {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, &[fnv1a(&self.problem_id)]));
        let mut out = self.outcomes.clone();
        for i in (1..out.len()).rev() {
            let j = rng.random_range(0..=i);
            out.swap(i, j);
        }
        out
    }
}

/// One problem's success/attempt tally.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemCounts {
    pub problem_id: String,
    pub successes: u64,
    pub attempts: u64,
}

/// Per-problem (successes, attempts) tallies; the sufficient statistic
/// every fitter consumes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountsState {
    entries: Vec<ProblemCounts>,
}

impl CountsState {
    /// Build a validated state. Fails if any entry has successes > attempts.
    pub fn from_entries(entries: Vec<ProblemCounts>) -> Result<Self> {
        for e in &entries {
            if e.successes > e.attempts {
                return Err(Error::SuccessesExceedAttempts {
                    id: e.problem_id.clone(),
                    successes: e.successes,
                    attempts: e.attempts,
                });
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[ProblemCounts] {
        &self.entries
    }

    /// Number of problems m.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total budget consumed across problems.
    pub fn total_attempts(&self) -> u64 {
        self.entries.iter().map(|e| e.attempts).sum()
    }

    pub fn min_attempts(&self) -> Option<u64> {
        self.entries.iter().map(|e| e.attempts).min()
    }

    pub fn max_attempts(&self) -> Option<u64> {
        self.entries.iter().map(|e| e.attempts).max()
    }

    /// Success ratios s_i / b_i. Only meaningful when every problem has
    /// at least one attempt; callers enforce that precondition.
    pub fn ratios(&self) -> Vec<f64> {
        self.entries
            .iter()
            .map(|e| {
                debug_assert!(e.attempts > 0);
                e.successes as f64 / e.attempts as f64
            })
            .collect()
    }

    /// The single attempt count shared by all problems, or an error when
    /// counts are non-uniform (some estimators are only defined for
    /// uniform sampling).
    pub fn uniform_attempts(&self, context: &'static str) -> Result<u64> {
        let first = self.min_attempts().ok_or(Error::EmptyInput)?;
        for e in &self.entries {
            if e.attempts != first {
                return Err(Error::NonUniformAttempts {
                    first,
                    second: e.attempts,
                    context,
                });
            }
        }
        Ok(first)
    }
}

/// Summary statistics plus any invariant violations for a set of tallies.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub problem_count: usize,
    pub min_attempts: u64,
    pub max_attempts: u64,
    pub total_attempts: u64,
    pub zero_success_problems: usize,
    pub violations: Vec<String>,
}

/// Validate raw tallies without constructing a `CountsState`. The
/// violations list is empty exactly when `CountsState::from_entries`
/// would accept the input.
pub fn validate_entries(entries: &[ProblemCounts]) -> ValidationReport {
    let mut violations = Vec::new();
    for e in entries {
        if e.successes > e.attempts {
            violations.push(format!(
                "problem {:?}: successes exceed attempts ({} > {})",
                e.problem_id, e.successes, e.attempts
            ));
        }
    }
    ValidationReport {
        problem_count: entries.len(),
        min_attempts: entries.iter().map(|e| e.attempts).min().unwrap_or(0),
        max_attempts: entries.iter().map(|e| e.attempts).max().unwrap_or(0),
        total_attempts: entries.iter().map(|e| e.attempts).sum(),
        zero_success_problems: entries.iter().filter(|e| e.successes == 0).count(),
        violations,
    }
}

/// Which record schema a line-delimited input uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseMode {
    Outcomes,
    Counts,
}

/// Result of parsing a line-delimited input.
#[derive(Debug, Clone)]
pub enum Records {
    Pools(Vec<OutcomePool>),
    Counts(CountsState),
}

#[derive(Serialize, Deserialize)]
struct OutcomeRecord {
    problem_id: String,
    outcomes: Vec<u8>,
}

#[derive(Serialize, Deserialize)]
struct CountRecord {
    problem_id: String,
    successes: u64,
    attempts: u64,
}

/// Parse one-problem-per-line JSON records, preserving input order.
/// Blank lines are skipped. Errors carry the 1-based line number.
pub fn parse_records<R: BufRead>(reader: R, mode: ParseMode) -> Result<Records> {
    let mut seen: HashSet<String> = HashSet::new();
    let mut pools = Vec::new();
    let mut entries = Vec::new();

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match mode {
            ParseMode::Outcomes => {
                let rec: OutcomeRecord =
                    serde_json::from_str(&line).map_err(|e| Error::Parse {
                        line: line_no,
                        message: e.to_string(),
                    })?;
                if !seen.insert(rec.problem_id.clone()) {
                    return Err(Error::DuplicateProblem {
                        line: line_no,
                        id: rec.problem_id,
                    });
                }
                let mut outcomes = Vec::with_capacity(rec.outcomes.len());
                for (i, v) in rec.outcomes.iter().enumerate() {
                    match v {
                        0 => outcomes.push(false),
                        1 => outcomes.push(true),
                        other => {
                            return Err(Error::Parse {
                                line: line_no,
                                message: format!(
                                    "outcome {} of problem {:?} is {} (expected 0 or 1)",
                                    i, rec.problem_id, other
                                ),
                            })
                        }
                    }
                }
                if outcomes.is_empty() {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("problem {:?} has an empty outcome list", rec.problem_id),
                    });
                }
                pools.push(OutcomePool {
                    problem_id: rec.problem_id,
                    outcomes,
                });
            }
            ParseMode::Counts => {
                let rec: CountRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
                    line: line_no,
                    message: e.to_string(),
                })?;
                if !seen.insert(rec.problem_id.clone()) {
                    return Err(Error::DuplicateProblem {
                        line: line_no,
                        id: rec.problem_id,
                    });
                }
                if rec.successes > rec.attempts {
                    return Err(Error::SuccessesExceedAttempts {
                        id: rec.problem_id,
                        successes: rec.successes,
                        attempts: rec.attempts,
                    });
                }
                entries.push(ProblemCounts {
                    problem_id: rec.problem_id,
                    successes: rec.successes,
                    attempts: rec.attempts,
                });
            }
        }
    }

    match mode {
        ParseMode::Outcomes => Ok(Records::Pools(pools)),
        ParseMode::Counts => Ok(Records::Counts(CountsState { entries })),
    }
}

pub fn parse_pools<R: BufRead>(reader: R) -> Result<Vec<OutcomePool>> {
    match parse_records(reader, ParseMode::Outcomes)? {
        Records::Pools(p) => Ok(p),
        Records::Counts(_) => unreachable!(),
    }
}

pub fn parse_counts<R: BufRead>(reader: R) -> Result<CountsState> {
    match parse_records(reader, ParseMode::Counts)? {
        Records::Counts(c) => Ok(c),
        Records::Pools(_) => unreachable!(),
    }
}

/// Serialize pools back to the newline-terminated record format.
pub fn pools_to_jsonl(pools: &[OutcomePool]) -> String {
    let mut out = String::new();
    for p in pools {
        let rec = OutcomeRecord {
            problem_id: p.problem_id.clone(),
            outcomes: p.outcomes.iter().map(|&o| u8::from(o)).collect(),
        };
        out.push_str(&serde_json::to_string(&rec).expect("record serialization"));
        out.push('\n');
    }
    out
}

/// Serialize tallies back to the newline-terminated record format.
pub fn counts_to_jsonl(counts: &CountsState) -> String {
    let mut out = String::new();
    for e in counts.entries() {
        let rec = CountRecord {
            problem_id: e.problem_id.clone(),
            successes: e.successes,
            attempts: e.attempts,
        };
        out.push_str(&serde_json::to_string(&rec).expect("record serialization"));
        out.push('\n');
    }
    out
}

/// Tally every outcome of every pool (the full-data counts).
pub fn full_pool_counts(pools: &[OutcomePool]) -> CountsState {
    let entries = pools
        .iter()
        .map(|p| ProblemCounts {
            problem_id: p.problem_id.clone(),
            successes: p.successes(),
            attempts: p.len() as u64,
        })
        .collect();
    CountsState { entries }
}

/// Shuffle each pool with its per-problem stream, then count the first
/// `per_problem` outcomes. Errors when any pool is smaller than that.
pub fn truncate_uniform(
    pools: &[OutcomePool],
    per_problem: u64,
    seed: u64,
) -> Result<CountsState> {
    for p in pools {
        if (p.len() as u64) < per_problem {
            return Err(Error::PoolTooSmall {
                id: p.problem_id.clone(),
                requested: per_problem,
                available: p.len() as u64,
            });
        }
    }
    let entries = pools
        .iter()
        .map(|p| {
            let shuffled = p.shuffled(seed);
            count_prefix(&p.problem_id, &shuffled, per_problem as usize)
        })
        .collect();
    Ok(CountsState { entries })
}

fn count_prefix(id: &str, outcomes: &[bool], n: usize) -> ProblemCounts {
    let successes = outcomes[..n].iter().filter(|&&o| o).count() as u64;
    ProblemCounts {
        problem_id: id.to_string(),
        successes,
        attempts: n as u64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pool(id: &str, bits: &[u8]) -> OutcomePool {
        OutcomePool::new(id, bits.iter().map(|&b| b == 1).collect()).unwrap()
    }

    #[test]
    fn parses_outcome_records() {
        let input = "{\"problem_id\":\"p1\",\"outcomes\":[1,0,1]}\n";
        let pools = parse_pools(input.as_bytes()).unwrap();
        assert_eq!(pools.len(), 1);
        assert_eq!(pools[0].len(), 3);
        assert_eq!(pools[0].successes(), 2);
    }

    #[test]
    fn parses_count_records() {
        let input = "{\"problem_id\":\"p1\",\"successes\":2,\"attempts\":3}\n";
        let counts = parse_counts(input.as_bytes()).unwrap();
        assert_eq!(counts.len(), 1);
        assert_eq!(counts.entries()[0].successes, 2);
        assert_eq!(counts.entries()[0].attempts, 3);
    }

    #[test]
    fn rejects_successes_above_attempts() {
        let input = "{\"problem_id\":\"p1\",\"successes\":4,\"attempts\":3}\n";
        let err = parse_counts(input.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("successes exceed attempts"), "{err}");
    }

    #[test]
    fn reports_line_number_of_malformed_record() {
        let input = "{\"problem_id\":\"p1\",\"successes\":1,\"attempts\":3}\nnot json\n";
        let err = parse_counts(input.as_bytes()).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn rejects_duplicate_problem_ids() {
        let input = "{\"problem_id\":\"p1\",\"outcomes\":[1]}\n{\"problem_id\":\"p1\",\"outcomes\":[0]}\n";
        let err = parse_pools(input.as_bytes()).unwrap_err();
        match err {
            Error::DuplicateProblem { line, id } => {
                assert_eq!(line, 2);
                assert_eq!(id, "p1");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn rejects_non_binary_outcomes() {
        let input = "{\"problem_id\":\"p1\",\"outcomes\":[1,2]}\n";
        assert!(parse_pools(input.as_bytes()).is_err());
    }

    #[test]
    fn count_prefix_counts_the_first_n() {
        let c = count_prefix("p1", &[true, true, false, false], 2);
        assert_eq!((c.successes, c.attempts), (2, 2));
    }

    #[test]
    fn truncate_with_zero_budget_gives_zero_counts() {
        let pools = vec![pool("a", &[1, 0, 1]), pool("b", &[0, 0])];
        let counts = truncate_uniform(&pools, 0, 9).unwrap();
        for e in counts.entries() {
            assert_eq!((e.successes, e.attempts), (0, 0));
        }
    }

    #[test]
    fn truncate_full_pool_is_shuffle_invariant() {
        let pools = vec![pool("big", &[1; 64]), pool("mixed", &[1, 0, 1, 0, 0, 1, 0, 0])];
        for seed in [0u64, 1, 42, 12345] {
            let counts = truncate_uniform(&pools, 8, seed).unwrap();
            // n = N for "mixed": counts must not depend on the shuffle.
            let mixed = &counts.entries()[1];
            assert_eq!((mixed.successes, mixed.attempts), (3, 8));
        }
    }

    #[test]
    fn truncate_rejects_budget_beyond_pool() {
        let pools = vec![pool("a", &[1, 0])];
        assert!(truncate_uniform(&pools, 3, 0).is_err());
    }

    #[test]
    fn truncate_is_deterministic_per_seed() {
        let pools: Vec<OutcomePool> = (0..10)
            .map(|i| {
                let bits: Vec<bool> = (0..40).map(|j| (i * 7 + j) % 3 == 0).collect();
                OutcomePool::new(format!("p{i}"), bits).unwrap()
            })
            .collect();
        let a = truncate_uniform(&pools, 11, 77).unwrap();
        let b = truncate_uniform(&pools, 11, 77).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn per_problem_shuffles_ignore_other_problems() {
        let a = pool("alpha", &[1, 0, 0, 1, 0, 1, 1, 0]);
        let b = pool("beta", &[0, 0, 1, 1]);
        let c = pool("gamma", &[1, 1, 0]);
        let two = truncate_uniform(&[a.clone(), b.clone()], 3, 5).unwrap();
        let three = truncate_uniform(&[a, b, c], 3, 5).unwrap();
        assert_eq!(two.entries()[0], three.entries()[0]);
        assert_eq!(two.entries()[1], three.entries()[1]);
    }

    #[test]
    fn full_pool_counts_tallies_everything() {
        let pools = vec![pool("a", &[1, 0, 1, 1]), pool("b", &[0, 0])];
        let counts = full_pool_counts(&pools);
        assert_eq!(counts.entries()[0].successes, 3);
        assert_eq!(counts.entries()[0].attempts, 4);
        assert_eq!(counts.total_attempts(), 6);
    }

    #[test]
    fn validation_report_flags_violations() {
        let entries = vec![
            ProblemCounts {
                problem_id: "ok".into(),
                successes: 1,
                attempts: 2,
            },
            ProblemCounts {
                problem_id: "bad".into(),
                successes: 5,
                attempts: 2,
            },
        ];
        let report = validate_entries(&entries);
        assert_eq!(report.problem_count, 2);
        assert_eq!(report.violations.len(), 1);
        assert!(CountsState::from_entries(entries).is_err());

        let ok_entries = vec![ProblemCounts {
            problem_id: "z".into(),
            successes: 0,
            attempts: 4,
        }];
        let report = validate_entries(&ok_entries);
        assert!(report.violations.is_empty());
        assert_eq!(report.zero_success_problems, 1);
        assert!(CountsState::from_entries(ok_entries).is_ok());
    }

    proptest! {
        #[test]
        fn jsonl_round_trip_pools(specs in proptest::collection::vec(
            (0usize..50, proptest::collection::vec(0u8..2, 1..20)), 1..8)
        ) {
            let pools: Vec<OutcomePool> = specs
                .iter()
                .enumerate()
                .map(|(i, (tag, bits))| {
                    OutcomePool::new(format!("p{i}_{tag}"), bits.iter().map(|&b| b == 1).collect())
                        .unwrap()
                })
                .collect();
            let text = pools_to_jsonl(&pools);
            let back = parse_pools(text.as_bytes()).unwrap();
            prop_assert_eq!(pools, back);
        }

        #[test]
        fn jsonl_round_trip_counts(raw in proptest::collection::vec((0u64..30, 0u64..30), 1..10)) {
            let entries: Vec<ProblemCounts> = raw
                .iter()
                .enumerate()
                .map(|(i, &(a, b))| ProblemCounts {
                    problem_id: format!("q{i}"),
                    successes: a.min(b),
                    attempts: a.max(b),
                })
                .collect();
            let counts = CountsState::from_entries(entries).unwrap();
            let text = counts_to_jsonl(&counts);
            let back = parse_counts(text.as_bytes()).unwrap();
            prop_assert_eq!(counts, back);
        }
    }
}
