use std::io::{self, Write};

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::space::{encode, Genotype};

/// One row of the search trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    /// 1-based iteration.
    pub iter: usize,
    pub genotype: Genotype,
    /// `None` when the evaluation failed and was skipped.
    pub fitness: Option<f64>,
    /// Running best fitness.
    pub best: Option<f64>,
    /// Value backpropagated this iteration.
    pub q: f64,
    /// Real evaluations so far.
    pub evals: usize,
    pub cached: bool,
}

impl Serialize for TraceRecord {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("TraceRecord", 6)?;
        st.serialize_field("iter", &self.iter)?;
        st.serialize_field("genotype", &encode(&self.genotype))?;
        st.serialize_field("fitness", &self.fitness)?;
        st.serialize_field("best", &self.best)?;
        st.serialize_field("q", &self.q)?;
        st.serialize_field("evals", &self.evals)?;
        st.end()
    }
}

/// One JSON object per line, keys in `iter, genotype, fitness, best, q, evals` order.
pub fn write_jsonl<W: Write>(mut out: W, trace: &[TraceRecord]) -> io::Result<()> {
    for record in trace {
        serde_json::to_writer(&mut out, record)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

fn opt(v: Option<f64>) -> String {
    v.map(|f| f.to_string()).unwrap_or_default()
}

/// Same columns as the JSONL form; the genotype cell is quoted codec text.
pub fn write_csv<W: Write>(out: W, trace: &[TraceRecord]) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iter", "genotype", "fitness", "best", "q", "evals"])?;
    for r in trace {
        w.write_record([
            r.iter.to_string(),
            encode(&r.genotype),
            opt(r.fitness),
            opt(r.best),
            r.q.to_string(),
            r.evals.to_string(),
        ])?;
    }
    w.flush()
}

/// Best-so-far curve: `iter,best,evals`.
pub fn write_curve<W: Write>(out: W, trace: &[TraceRecord]) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iter", "best", "evals"])?;
    for r in trace {
        w.write_record([r.iter.to_string(), opt(r.best), r.evals.to_string()])?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{sample_uniform, SpaceConfig};
    use rand::SeedableRng;

    fn record(fitness: Option<f64>) -> TraceRecord {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        TraceRecord {
            iter: 3,
            genotype: sample_uniform(&SpaceConfig::default(), &mut rng),
            fitness,
            best: Some(0.75),
            q: 0.625,
            evals: 2,
            cached: false,
        }
    }

    #[test]
    fn jsonl_key_order() {
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &[record(Some(0.5))]).unwrap();
        let line = String::from_utf8(buf).unwrap();
        assert!(line.ends_with('\n'));
        let keys: Vec<_> = [
            "\"iter\"",
            "\"genotype\"",
            "\"fitness\"",
            "\"best\"",
            "\"q\"",
            "\"evals\"",
        ]
        .iter()
        .map(|k| line.find(k).unwrap())
        .collect();
        assert!(keys.windows(2).all(|w| w[0] < w[1]));
        assert!(line.starts_with("{\"iter\":3,\"genotype\":\"mnasgeno v1\\n"));
        assert!(line.contains("\"fitness\":0.5,\"best\":0.75,\"q\":0.625,\"evals\":2}"));
    }

    #[test]
    fn failed_fitness_is_null() {
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &[record(None)]).unwrap();
        assert!(String::from_utf8(buf).unwrap().contains("\"fitness\":null"));
    }

    #[test]
    fn csv_roundtrips_genotype() {
        let r = record(None);
        let mut buf = Vec::new();
        write_csv(&mut buf, std::slice::from_ref(&r)).unwrap();
        let mut reader = csv::Reader::from_reader(buf.as_slice());
        let row = reader.records().next().unwrap().unwrap();
        assert_eq!(&row[0], "3");
        assert_eq!(crate::space::decode(&row[1]).unwrap(), r.genotype);
        assert_eq!(&row[2], "");
        assert_eq!(&row[3], "0.75");
    }
}
