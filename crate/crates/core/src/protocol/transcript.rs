//! Line-record transcripts: a header line followed by one round per line.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{Evaluation, Inputs, ProtocolError, RoundMix};
use crate::strategies::RoundType;

fn is_false(b: &bool) -> bool {
    !*b
}

/// One referee round. `c` is stored as its integer code.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u64,
    pub c: u8,
    pub x: usize,
    pub y: usize,
    pub a: Vec<i8>,
    pub b: Vec<i8>,
    pub accept: bool,
    pub sub: Vec<bool>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub malformed: bool,
}

impl RoundRecord {
    pub fn new(round: u64, inputs: Inputs, a: Vec<i8>, b: Vec<i8>, ev: Evaluation) -> Self {
        RoundRecord {
            round,
            c: inputs.c.code(),
            x: inputs.x,
            y: inputs.y,
            a,
            b,
            accept: ev.accept,
            sub: ev.sub,
            malformed: ev.malformed,
        }
    }

    pub fn round_type(&self) -> Option<RoundType> {
        RoundType::from_code(self.c)
    }

    pub fn inputs(&self) -> Result<Inputs, ProtocolError> {
        let c = self
            .round_type()
            .ok_or_else(|| ProtocolError::Format(format!("round {}: c = {}", self.round, self.c)))?;
        Ok(Inputs { c, x: self.x, y: self.y })
    }

    /// Checks the record-level invariants (arity, ±1 entries, accept as the
    /// conjunction of `sub`). Malformed rounds are allowed any answers.
    pub fn check(&self, n: usize) -> Result<(), ProtocolError> {
        let inputs = self.inputs()?;
        inputs.validate(n)?;
        if self.accept != (!self.sub.is_empty() && self.sub.iter().all(|&s| s)) {
            return Err(ProtocolError::Format(format!("round {}: accept disagrees with sub", self.round)));
        }
        if !self.malformed && (self.a.len() != n || self.b.len() != inputs.c.bob_arity(n)) {
            return Err(ProtocolError::Format(format!("round {}: answer arity", self.round)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptHeader {
    pub n: usize,
    pub seed: u64,
    pub rounds: u64,
    pub mix: RoundMix,
    pub device: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transcript {
    pub header: TranscriptHeader,
    pub records: Vec<RoundRecord>,
}

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    header: TranscriptHeader,
}

impl Transcript {
    pub fn n(&self) -> usize {
        self.header.n
    }

    pub fn accept_rate(&self, c: Option<RoundType>) -> Option<f64> {
        let (mut k, mut total) = (0u64, 0u64);
        for r in &self.records {
            if c.map_or(true, |c| c.code() == r.c) {
                total += 1;
                k += r.accept as u64;
            }
        }
        (total > 0).then(|| k as f64 / total as f64)
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<(), ProtocolError> {
        let head = HeaderLine { header: self.header.clone() };
        writeln!(w, "{}", serde_json::to_string(&head).map_err(|e| ProtocolError::Format(e.to_string()))?)?;
        for r in &self.records {
            writeln!(w, "{}", serde_json::to_string(r).map_err(|e| ProtocolError::Format(e.to_string()))?)?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("utf-8")
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self, ProtocolError> {
        let mut lines = r.lines().filter(|l| l.as_ref().map_or(true, |s| !s.trim().is_empty()));
        let first = lines.next().ok_or_else(|| ProtocolError::Format("empty transcript".into()))??;
        let head: HeaderLine =
            serde_json::from_str(&first).map_err(|e| ProtocolError::Format(format!("header: {e}")))?;
        let mut records = Vec::new();
        for (k, line) in lines.enumerate() {
            let rec: RoundRecord = serde_json::from_str(&line?)
                .map_err(|e| ProtocolError::Format(format!("line {}: {e}", k + 2)))?;
            rec.check(head.header.n)?;
            records.push(rec);
        }
        Ok(Transcript { header: head.header, records })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::run_protocol;
    use crate::strategies::DeviceModel;

    #[test]
    fn jsonl_round_trip() {
        let dev = DeviceModel::honest(3).unwrap();
        let t = run_protocol(&dev, 50, &RoundMix::uniform(3), 3).unwrap();
        let text = t.to_jsonl();
        assert!(text.starts_with("{\"header\":"));
        assert_eq!(text.lines().count(), 51);
        let back = Transcript::read_jsonl(text.as_bytes()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn record_fields() {
        let r = RoundRecord {
            round: 4,
            c: 1,
            x: 1,
            y: 2,
            a: vec![1, -1, 1],
            b: vec![1, -1, -1],
            accept: true,
            sub: vec![true],
            malformed: false,
        };
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(|s| s.as_str()).collect();
        assert_eq!(keys.len(), 8);
        assert_eq!(v["a"], serde_json::json!([1, -1, 1]));
        r.check(3).unwrap();
        let bad = RoundRecord { accept: false, ..r };
        assert!(bad.check(3).is_err());
    }
}
