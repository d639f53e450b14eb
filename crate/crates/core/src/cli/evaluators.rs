//! Evaluator backends selectable from the command line.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::augment::AugmentationKind;
use crate::sensitivity::{AnalyticEvaluator, EvalError, Evaluator, Measurement};

use super::CliError;

/// Linear interpolation over a per-kind table of measurements.
#[derive(Clone, Debug, Default)]
pub struct TableEvaluator {
    rows: BTreeMap<AugmentationKind, Vec<(f64, Measurement)>>,
}

#[derive(Deserialize)]
struct TableRow {
    kind: String,
    alpha: f64,
    ma: f64,
    kid: f64,
}

impl TableEvaluator {
    pub fn from_rows(
        rows: impl IntoIterator<Item = (AugmentationKind, f64, Measurement)>,
    ) -> Result<Self, String> {
        let mut map: BTreeMap<AugmentationKind, Vec<(f64, Measurement)>> = BTreeMap::new();
        for (kind, alpha, m) in rows {
            if !alpha.is_finite() || !m.ma.is_finite() || !m.kid.is_finite() {
                return Err(format!("{kind}: non-finite value at alpha {alpha}"));
            }
            map.entry(kind).or_default().push((alpha, m));
        }
        for (kind, rows) in &mut map {
            rows.sort_by(|a, b| a.0.total_cmp(&b.0));
            if rows.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(format!("{kind}: duplicate alpha"));
            }
        }
        Ok(Self { rows: map })
    }

    /// CSV with header `kind,alpha,ma,kid`.
    pub fn from_csv(path: &Path) -> Result<Self, CliError> {
        let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::io(path, e))?;
        let mut rows = Vec::new();
        for (i, row) in reader.deserialize::<TableRow>().enumerate() {
            let row = row
                .map_err(|e| CliError::Usage(format!("{}: row {}: {e}", path.display(), i + 1)))?;
            let kind = row
                .kind
                .parse::<AugmentationKind>()
                .map_err(|e| CliError::Usage(format!("{}: row {}: {e}", path.display(), i + 1)))?;
            rows.push((
                kind,
                row.alpha,
                Measurement {
                    ma: row.ma,
                    kid: row.kid,
                },
            ));
        }
        Self::from_rows(rows).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }
}

impl Evaluator for TableEvaluator {
    fn evaluate(&self, kind: AugmentationKind, alpha: f64) -> Result<Measurement, EvalError> {
        let rows = self
            .rows
            .get(&kind)
            .ok_or_else(|| EvalError(format!("table has no rows for {kind}")))?;
        let (lo, hi) = (rows[0].0, rows[rows.len() - 1].0);
        if !(alpha >= lo && alpha <= hi) {
            return Err(EvalError(format!(
                "{kind}: alpha {alpha} outside table range [{lo}, {hi}]"
            )));
        }
        let i = rows.partition_point(|r| r.0 < alpha);
        if rows[i].0 == alpha {
            return Ok(rows[i].1);
        }
        let ((a0, m0), (a1, m1)) = (rows[i - 1], rows[i]);
        let t = (alpha - a0) / (a1 - a0);
        Ok(Measurement {
            ma: m0.ma + t * (m1.ma - m0.ma),
            kid: m0.kid + t * (m1.kid - m0.kid),
        })
    }

    fn concurrent(&self) -> bool {
        true
    }
}

#[derive(Serialize)]
struct Request {
    kind: AugmentationKind,
    alpha: f64,
}

struct Pipe {
    stdin: Option<ChildStdin>,
    stdout: BufReader<ChildStdout>,
}

/// Drives a child process over line-delimited JSON: one `{"kind", "alpha"}`
/// request per line on its stdin, one `{"ma", "kid"}` response per line on
/// its stdout. Requests are strictly serial.
pub struct ExecEvaluator {
    command: String,
    child: Mutex<Child>,
    pipe: Mutex<Pipe>,
}

impl ExecEvaluator {
    /// Runs `command` through `sh -c`.
    pub fn spawn(command: &str) -> Result<Self, CliError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| CliError::Evaluator(format!("cannot start {command:?}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(Self {
            command: command.to_string(),
            child: Mutex::new(child),
            pipe: Mutex::new(Pipe {
                stdin: Some(stdin),
                stdout,
            }),
        })
    }
}

impl Evaluator for ExecEvaluator {
    fn evaluate(&self, kind: AugmentationKind, alpha: f64) -> Result<Measurement, EvalError> {
        let mut pipe = self
            .pipe
            .lock()
            .map_err(|_| EvalError("evaluator pipe poisoned".into()))?;
        let request = serde_json::to_string(&Request { kind, alpha }).expect("request serialises");
        let stdin = pipe
            .stdin
            .as_mut()
            .expect("stdin open while evaluator lives");
        writeln!(stdin, "{request}")
            .and_then(|_| stdin.flush())
            .map_err(|e| EvalError(format!("{}: write failed: {e}", self.command)))?;
        let mut line = String::new();
        let n = pipe
            .stdout
            .read_line(&mut line)
            .map_err(|e| EvalError(format!("{}: read failed: {e}", self.command)))?;
        if n == 0 {
            return Err(EvalError(format!(
                "{}: closed its output after request {request}",
                self.command
            )));
        }
        let line = line.trim_end();
        let m: Measurement = serde_json::from_str(line)
            .map_err(|e| EvalError(format!("unparseable response {line:?}: {e}")))?;
        if !(0.0..=1.0).contains(&m.ma) || !(m.kid >= 0.0) || !m.kid.is_finite() {
            return Err(EvalError(format!("response out of range {line:?}")));
        }
        Ok(m)
    }
}

impl Drop for ExecEvaluator {
    fn drop(&mut self) {
        if let Ok(pipe) = self.pipe.get_mut() {
            pipe.stdin.take();
        }
        if let Ok(child) = self.child.get_mut() {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

/// Any of the evaluator backends behind one type.
pub enum AnyEvaluator {
    Analytic(AnalyticEvaluator),
    Table(TableEvaluator),
    Exec(ExecEvaluator),
}

impl Evaluator for AnyEvaluator {
    fn evaluate(&self, kind: AugmentationKind, alpha: f64) -> Result<Measurement, EvalError> {
        match self {
            AnyEvaluator::Analytic(e) => e.evaluate(kind, alpha),
            AnyEvaluator::Table(e) => e.evaluate(kind, alpha),
            AnyEvaluator::Exec(e) => e.evaluate(kind, alpha),
        }
    }

    fn concurrent(&self) -> bool {
        match self {
            AnyEvaluator::Analytic(e) => e.concurrent(),
            AnyEvaluator::Table(e) => e.concurrent(),
            AnyEvaluator::Exec(e) => e.concurrent(),
        }
    }
}

/// Parses `analytic:<family>:<params>`, `table:<csv>` or `exec:<command>`.
pub fn parse_evaluator(spec: &str) -> Result<AnyEvaluator, CliError> {
    let (scheme, rest) = spec.split_once(':').ok_or_else(|| {
        CliError::Usage(format!(
            "evaluator {spec:?} needs a scheme: analytic:, table: or exec:"
        ))
    })?;
    match scheme {
        "analytic" => rest
            .parse()
            .map(|f| AnyEvaluator::Analytic(AnalyticEvaluator::new(f)))
            .map_err(CliError::Usage),
        "table" => TableEvaluator::from_csv(Path::new(rest)).map(AnyEvaluator::Table),
        "exec" => ExecEvaluator::spawn(rest).map(AnyEvaluator::Exec),
        other => Err(CliError::Usage(format!(
            "unknown evaluator scheme {other:?}"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(ma: f64, kid: f64) -> Measurement {
        Measurement { ma, kid }
    }

    #[test]
    fn table_interpolates_linearly() {
        let t = TableEvaluator::from_rows([
            (AugmentationKind::Blur, 1.0, m(0.2, 0.4)),
            (AugmentationKind::Blur, 0.0, m(0.8, 0.0)),
            (AugmentationKind::Blur, 0.5, m(0.6, 0.1)),
        ])
        .unwrap();
        let got = t.evaluate(AugmentationKind::Blur, 0.75).unwrap();
        assert!((got.ma - 0.4).abs() < 1e-15 && (got.kid - 0.25).abs() < 1e-15);
        assert_eq!(
            t.evaluate(AugmentationKind::Blur, 0.5).unwrap(),
            m(0.6, 0.1)
        );
        assert!(t.evaluate(AugmentationKind::Noise, 0.5).is_err());
        assert!(TableEvaluator::from_rows([
            (AugmentationKind::Blur, 0.5, m(0.6, 0.1)),
            (AugmentationKind::Blur, 0.5, m(0.6, 0.1)),
        ])
        .is_err());
    }

    #[test]
    fn exec_round_trip_and_protocol_errors() {
        let ev = ExecEvaluator::spawn(r#"while read l; do echo '{"ma": 0.5, "kid": 0.01}'; done"#)
            .unwrap();
        assert_eq!(
            ev.evaluate(AugmentationKind::Blur, 0.3).unwrap(),
            m(0.5, 0.01)
        );
        assert_eq!(
            ev.evaluate(AugmentationKind::Noise, 0.7).unwrap(),
            m(0.5, 0.01)
        );
        let bad = ExecEvaluator::spawn(r#"read l; echo 'not json'"#).unwrap();
        let err = bad.evaluate(AugmentationKind::Blur, 0.3).unwrap_err();
        assert!(err.0.contains("not json"), "{err}");
        let quiet = ExecEvaluator::spawn("true").unwrap();
        assert!(quiet.evaluate(AugmentationKind::Blur, 0.3).is_err());
    }

    #[test]
    fn evaluator_spec_parsing() {
        assert!(matches!(
            parse_evaluator("analytic:power:2"),
            Ok(AnyEvaluator::Analytic(_))
        ));
        assert!(matches!(
            parse_evaluator("analytic:wave:2"),
            Err(CliError::Usage(_))
        ));
        assert!(matches!(
            parse_evaluator("power:2"),
            Err(CliError::Usage(_))
        ));
        assert!(matches!(
            parse_evaluator("nothing"),
            Err(CliError::Usage(_))
        ));
    }
}
