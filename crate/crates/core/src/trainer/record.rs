use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{Transition, UpdateMode};
use crate::error::{Error, Result};

/// How the run updated `θ`; needed to replay the record deterministically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunMode {
    pub update: UpdateMode,
    /// Mini-batch size `Ĥ` of a replay run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replay_batch: Option<usize>,
}

/// One executed step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub n: u64,
    pub x: usize,
    pub a: usize,
    pub reward: f64,
    pub next: usize,
    pub gamma: f64,
    pub epsilon: f64,
    pub explored: bool,
    /// The greedy argmax at `x_n` was tied.
    pub tie: bool,
    /// Step of the checkpoint holding `θ_n`, when one was taken before this step.
    pub checkpoint: Option<u64>,
    /// Steps `k(n, i)` of the replayed mini-batch; `None` when no replay
    /// update happened.
    pub batch: Option<Vec<u64>>,
}

impl StepRecord {
    pub fn transition(&self) -> Transition {
        Transition {
            step: self.n,
            x: self.x,
            a: self.a,
            reward: self.reward,
            next: self.next,
        }
    }
}

/// Complete per-step log of a run.
///
/// CSV layout, one row per step:
///
/// ```text
/// n,x,a,reward,x_next,gamma,epsilon,explored,tie,checkpoint,batch
/// ```
///
/// `explored` and `tie` are `0`/`1`; `checkpoint` is empty or the
/// checkpoint's step; `batch` is empty or `;`-separated step indices.
/// Floats are written in shortest round-trip form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub mode: RunMode,
    pub rows: Vec<StepRecord>,
}

pub const RECORD_HEADER: [&str; 11] = [
    "n", "x", "a", "reward", "x_next", "gamma", "epsilon", "explored", "tie", "checkpoint", "batch",
];

fn parse_err(line: u64, msg: impl Into<String>) -> Error {
    Error::Parse {
        context: format!("record row {line}"),
        message: msg.into(),
    }
}

impl TrainRecord {
    pub fn new(mode: RunMode) -> Self {
        Self { mode, rows: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn gammas(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.gamma).collect()
    }

    /// Row of step `n`.
    pub fn row(&self, n: u64) -> Result<&StepRecord> {
        self.rows
            .get(n as usize)
            .ok_or_else(|| Error::Input(format!("step {n} beyond record of {} steps", self.rows.len())))
    }

    /// Transitions of the mini-batch replayed at step `n`, if any.
    pub fn batch_transitions(&self, n: u64) -> Result<Option<Vec<Transition>>> {
        let Some(steps) = &self.row(n)?.batch else {
            return Ok(None);
        };
        steps
            .iter()
            .map(|&k| {
                if k > n {
                    return Err(Error::Input(format!("batch of step {n} references future step {k}")));
                }
                Ok(self.row(k)?.transition())
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    /// Rows must be exactly the steps `0, 1, 2, …`.
    pub fn validate(&self) -> Result<()> {
        for (i, row) in self.rows.iter().enumerate() {
            if row.n != i as u64 {
                return Err(Error::validation(format!("record[{i}].n"), format!("expected step {i}, found {}", row.n)));
            }
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::Numerical(format!("CSV write failed: {e}"));
        w.write_record(RECORD_HEADER).map_err(csv_err)?;
        for r in &self.rows {
            let batch = r
                .batch
                .as_ref()
                .map(|b| b.iter().map(u64::to_string).collect::<Vec<_>>().join(";"))
                .unwrap_or_default();
            w.write_record([
                r.n.to_string(),
                r.x.to_string(),
                r.a.to_string(),
                r.reward.to_string(),
                r.next.to_string(),
                r.gamma.to_string(),
                r.epsilon.to_string(),
                u8::from(r.explored).to_string(),
                u8::from(r.tie).to_string(),
                r.checkpoint.map(|c| c.to_string()).unwrap_or_default(),
                batch,
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::Numerical(format!("CSV flush failed: {e}")))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("CSV is UTF-8")
    }

    pub fn read_csv<R: Read>(input: R, mode: RunMode) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let headers = rdr.headers().map_err(|e| parse_err(0, e.to_string()))?.clone();
        if headers.iter().ne(RECORD_HEADER) {
            return Err(parse_err(0, format!("unexpected header {headers:?}")));
        }
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let line = i as u64 + 1;
            let rec = rec.map_err(|e| parse_err(line, e.to_string()))?;
            let field = |j: usize| rec.get(j).unwrap_or("");
            fn num<T: std::str::FromStr>(s: &str, name: &str, line: u64) -> Result<T> {
                s.parse()
                    .map_err(|_| parse_err(line, format!("column `{name}`: cannot parse `{s}`")))
            }
            let flag = |j: usize| -> Result<bool> {
                match field(j) {
                    "0" => Ok(false),
                    "1" => Ok(true),
                    s => Err(parse_err(line, format!("column `{}`: expected 0 or 1, got `{s}`", RECORD_HEADER[j]))),
                }
            };
            let checkpoint = match field(9) {
                "" => None,
                s => Some(num(s, "checkpoint", line)?),
            };
            let batch = match field(10) {
                "" => None,
                s => Some(s.split(';').map(|k| num(k, "batch", line)).collect::<Result<Vec<u64>>>()?),
            };
            rows.push(StepRecord {
                n: num(field(0), "n", line)?,
                x: num(field(1), "x", line)?,
                a: num(field(2), "a", line)?,
                reward: num(field(3), "reward", line)?,
                next: num(field(4), "x_next", line)?,
                gamma: num(field(5), "gamma", line)?,
                epsilon: num(field(6), "epsilon", line)?,
                explored: flag(7)?,
                tie: flag(8)?,
                checkpoint,
                batch,
            });
        }
        let record = Self { mode, rows };
        record.validate()?;
        Ok(record)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> TrainRecord {
        let mut r = TrainRecord::new(RunMode {
            update: UpdateMode::Online,
            replay_batch: Some(2),
        });
        for n in 0..3u64 {
            r.rows.push(StepRecord {
                n,
                x: n as usize,
                a: 1,
                reward: 0.1 + 0.2,
                next: n as usize + 1,
                gamma: 0.5 * (n as f64 + 10.0).powf(-0.6),
                epsilon: 1.0 / 3.0,
                explored: n == 1,
                tie: false,
                checkpoint: (n == 0).then_some(0),
                batch: (n > 0).then(|| vec![n, n - 1]),
            });
        }
        r
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let r = sample();
        let text = r.to_csv_string();
        assert!(text.starts_with("n,x,a,reward,x_next,gamma,epsilon,explored,tie,checkpoint,batch\n"));
        let back = TrainRecord::read_csv(text.as_bytes(), r.mode).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn batch_lookup_returns_transitions() {
        let r = sample();
        let batch = r.batch_transitions(2).unwrap().unwrap();
        assert_eq!(batch[0].step, 2);
        assert_eq!(batch[1].x, 1);
        assert_eq!(r.batch_transitions(0).unwrap(), None);
    }

    #[test]
    fn rejects_gaps_in_step_indices() {
        let mut r = sample();
        r.rows[2].n = 5;
        assert!(r.validate().is_err());
        let text = r.to_csv_string();
        assert!(TrainRecord::read_csv(text.as_bytes(), r.mode).is_err());
    }

    #[test]
    fn bad_cells_name_the_row_and_column() {
        let text = "n,x,a,reward,x_next,gamma,epsilon,explored,tie,checkpoint,batch\n0,0,1,zero,1,0.1,0,0,0,,\n";
        let msg = TrainRecord::read_csv(
            text.as_bytes(),
            RunMode {
                update: UpdateMode::Online,
                replay_batch: None,
            },
        )
        .unwrap_err()
        .to_string();
        assert!(msg.contains("row 1") && msg.contains("reward"), "{msg}");
    }
}
