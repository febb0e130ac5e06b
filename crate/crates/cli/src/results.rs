//! The results CSV dialect: fixed header, 9 significant digits, LF endings.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use silofed_core::fmt::sig9;

use crate::error::CliError;

pub const HEADER: [&str; 9] = [
    "method",
    "lambda",
    "epsilon",
    "delta",
    "seed",
    "round",
    "train_metric",
    "test_metric",
    "realized_epsilon",
];

pub const AGG_HEADER: [&str; 10] = [
    "method",
    "lambda",
    "epsilon",
    "delta",
    "round",
    "seeds",
    "train_metric_mean",
    "train_metric_std",
    "test_metric_mean",
    "test_metric_std",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Seed {
    Run(u64),
    /// Mean over the seeds of one sweep point.
    Agg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Round {
    At(usize),
    Final,
    /// The run failed; metrics are NaN.
    Error,
}

impl fmt::Display for Seed {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        match self {
            Seed::Run(s) => write!(f, "{s}"),
            Seed::Agg => f.write_str("agg"),
        }
    }
}

impl fmt::Display for Round {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        match self {
            Round::At(r) => write!(f, "{r}"),
            Round::Final => f.write_str("final"),
            Round::Error => f.write_str("error"),
        }
    }
}

impl FromStr for Seed {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "agg" => Ok(Seed::Agg),
            _ => s.parse().map(Seed::Run).map_err(|_| format!("bad seed `{s}`")),
        }
    }
}

impl FromStr for Round {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "final" => Ok(Round::Final),
            "error" => Ok(Round::Error),
            _ => s.parse().map(Round::At).map_err(|_| format!("bad round `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub method: String,
    /// Empty for methods without a regularization strength.
    pub lambda: Option<f64>,
    pub epsilon: f64,
    pub delta: f64,
    pub seed: Seed,
    pub round: Round,
    pub train_metric: f64,
    pub test_metric: f64,
    pub realized_epsilon: f64,
}

impl ResultRow {
    fn record(&self) -> [String; 9] {
        [
            self.method.clone(),
            self.lambda.map(sig9).unwrap_or_default(),
            sig9(self.epsilon),
            sig9(self.delta),
            self.seed.to_string(),
            self.round.to_string(),
            sig9(self.train_metric),
            sig9(self.test_metric),
            sig9(self.realized_epsilon),
        ]
    }

    /// `realized_epsilon <= epsilon`, with NaN (failed runs) passing.
    pub fn within_budget(&self) -> bool {
        self.realized_epsilon.is_nan() || self.realized_epsilon <= self.epsilon
    }
}

/// Mean and sample standard deviation over seeds of one point and round.
#[derive(Debug, Clone, PartialEq)]
pub struct AggRow {
    pub method: String,
    pub lambda: Option<f64>,
    pub epsilon: f64,
    pub delta: f64,
    pub round: Round,
    pub seeds: usize,
    pub train_mean: f64,
    pub train_std: f64,
    pub test_mean: f64,
    pub test_std: f64,
}

impl AggRow {
    fn record(&self) -> [String; 10] {
        [
            self.method.clone(),
            self.lambda.map(sig9).unwrap_or_default(),
            sig9(self.epsilon),
            sig9(self.delta),
            self.round.to_string(),
            self.seeds.to_string(),
            sig9(self.train_mean),
            sig9(self.train_std),
            sig9(self.test_mean),
            sig9(self.test_std),
        ]
    }
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Aggregates the per-seed rows of one sweep point: one `agg` row per
/// reported round over the seeds that succeeded. The `agg` row's realized
/// ε is the largest over those seeds.
pub fn aggregate(rows: &[ResultRow]) -> (Vec<ResultRow>, Vec<AggRow>) {
    let Some(first) = rows.first() else {
        return (Vec::new(), Vec::new());
    };
    let mut rounds: Vec<Round> = rows.iter().map(|r| r.round).collect();
    rounds.sort();
    rounds.dedup();
    let failed_everywhere = rounds == [Round::Error];
    if failed_everywhere {
        rounds = vec![Round::Final];
    }
    rounds.retain(|r| *r != Round::Error);
    let mut main = Vec::new();
    let mut agg = Vec::new();
    for round in rounds {
        let ok: Vec<&ResultRow> = rows.iter().filter(|r| r.round == round).collect();
        let train: Vec<f64> = ok.iter().map(|r| r.train_metric).collect();
        let test: Vec<f64> = ok.iter().map(|r| r.test_metric).collect();
        let (train_mean, train_std) = mean_std(&train);
        let (test_mean, test_std) = mean_std(&test);
        let realized = ok.iter().map(|r| r.realized_epsilon).fold(f64::NAN, f64::max);
        main.push(ResultRow {
            method: first.method.clone(),
            lambda: first.lambda,
            epsilon: first.epsilon,
            delta: first.delta,
            seed: Seed::Agg,
            round,
            train_metric: train_mean,
            test_metric: test_mean,
            realized_epsilon: realized,
        });
        agg.push(AggRow {
            method: first.method.clone(),
            lambda: first.lambda,
            epsilon: first.epsilon,
            delta: first.delta,
            round,
            seeds: ok.len(),
            train_mean,
            train_std,
            test_mean,
            test_std,
        });
    }
    (main, agg)
}

fn writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out)
}

fn csv_io(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::io(path, e.into())
}

pub fn write_results(path: &Path, rows: &[ResultRow]) -> Result<(), CliError> {
    let f = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = writer(std::io::BufWriter::new(f));
    w.write_record(HEADER).map_err(csv_io(path))?;
    for r in rows {
        w.write_record(r.record()).map_err(csv_io(path))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_agg(path: &Path, rows: &[AggRow]) -> Result<(), CliError> {
    let f = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = writer(std::io::BufWriter::new(f));
    w.write_record(AGG_HEADER).map_err(csv_io(path))?;
    for r in rows {
        w.write_record(r.record()).map_err(csv_io(path))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn number(s: &str) -> Result<f64, String> {
    s.parse::<f64>().map_err(|_| format!("bad number `{s}`"))
}

/// Reads a results CSV, checking the header exactly. Returns each row with
/// its 1-based line number.
pub fn read_results(path: &Path) -> Result<Vec<(u64, ResultRow)>, CliError> {
    let f = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(f);
    let parse_err = |line: u64, msg: String| CliError::Parse {
        path: path.into(),
        line,
        msg,
    };
    let mut out = Vec::new();
    let mut records = rdr.records();
    match records.next() {
        Some(Ok(h)) if h.iter().eq(HEADER) => {}
        Some(Ok(h)) => return Err(parse_err(1, format!("unexpected header `{}`", h.iter().collect::<Vec<_>>().join(",")))),
        Some(Err(e)) => return Err(parse_err(1, e.to_string())),
        None => return Err(parse_err(1, "empty file".into())),
    }
    for rec in records {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let f = |i: usize| &rec[i];
        let row = (|| -> Result<ResultRow, String> {
            Ok(ResultRow {
                method: f(0).to_string(),
                lambda: if f(1).is_empty() { None } else { Some(number(f(1))?) },
                epsilon: number(f(2))?,
                delta: number(f(3))?,
                seed: f(4).parse()?,
                round: f(5).parse()?,
                train_metric: number(f(6))?,
                test_metric: number(f(7))?,
                realized_epsilon: number(f(8))?,
            })
        })()
        .map_err(|m| parse_err(line, m))?;
        out.push((line, row));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(seed: Seed, round: Round, test: f64) -> ResultRow {
        ResultRow {
            method: "mrmtl".into(),
            lambda: Some(0.1),
            epsilon: 1.0,
            delta: 1e-5,
            seed,
            round,
            train_metric: test / 2.0,
            test_metric: test,
            realized_epsilon: 0.9 + test / 100.0,
        }
    }

    #[test]
    fn aggregates_by_round_and_skips_failures() {
        let rows = vec![
            row(Seed::Run(0), Round::Final, 0.2),
            row(Seed::Run(1), Round::Final, 0.4),
            row(Seed::Run(2), Round::Error, f64::NAN),
        ];
        let (main, agg) = aggregate(&rows);
        assert_eq!(main.len(), 1);
        assert_eq!(main[0].seed, Seed::Agg);
        assert!((main[0].test_metric - 0.3).abs() < 1e-15);
        assert_eq!(main[0].realized_epsilon, 0.904);
        assert_eq!(agg[0].seeds, 2);
        assert!((agg[0].test_std - 0.02f64.sqrt()).abs() < 1e-15);

        let (main, agg) = aggregate(&[row(Seed::Run(0), Round::Error, f64::NAN)]);
        assert_eq!(agg[0].seeds, 0);
        assert!(main[0].test_metric.is_nan());
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let rows = vec![
            row(Seed::Run(3), Round::At(5), 0.25),
            ResultRow {
                lambda: None,
                epsilon: f64::INFINITY,
                realized_epsilon: f64::INFINITY,
                ..row(Seed::Agg, Round::Final, 1.0 / 3.0)
            },
        ];
        write_results(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "method,lambda,epsilon,delta,seed,round,train_metric,test_metric,realized_epsilon\n\
             mrmtl,0.1,1,1e-05,3,5,0.125,0.25,0.9025\n\
             mrmtl,,inf,1e-05,agg,final,0.166666667,0.333333333,inf\n"
        );
        let back = read_results(&path).unwrap();
        assert_eq!(back[0], (2, rows[0].clone()));
        assert_eq!(back[1].1.lambda, None);
        assert_eq!(back[1].0, 3);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, format!("{}\nlocal,,1,1e-05,0,final,0.1,0.2,0.9\nlocal,,1,1e-05,x,final,0.1,0.2,0.9\n", HEADER.join(","))).unwrap();
        match read_results(&path) {
            Err(CliError::Parse { line: 3, msg, .. }) => assert!(msg.contains("seed")),
            other => panic!("{other:?}"),
        }
        std::fs::write(&path, "a,b\n").unwrap();
        assert!(matches!(read_results(&path), Err(CliError::Parse { line: 1, .. })));
        assert!(matches!(read_results(&dir.path().join("none.csv")), Err(CliError::NotFound { .. })));
    }
}
