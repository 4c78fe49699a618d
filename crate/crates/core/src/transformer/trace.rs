use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Prompt,
    Generated,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceEntry {
    pub position: usize,
    pub role: Role,
    pub vector: Vec<f64>,
}

/// Per-layer post-residual block outputs recorded during a forward or
/// decode pass, restricted to the tapped layers.
#[derive(Debug, Clone, Default)]
pub struct ActivationTrace {
    pub layers: BTreeMap<usize, Vec<TraceEntry>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TraceRecord {
    layer: usize,
    position: usize,
    role: Role,
    vector: Vec<f64>,
}

impl ActivationTrace {
    pub fn record(&mut self, layer: usize, position: usize, role: Role, vector: Vec<f64>) {
        self.layers.entry(layer).or_default().push(TraceEntry {
            position,
            role,
            vector,
        });
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    /// Token-mean activation over generated positions at one layer.
    /// None when the layer was not tapped or has no generated positions.
    pub fn mean_generated(&self, layer: usize) -> Option<Vec<f64>> {
        let entries = self.layers.get(&layer)?;
        let gen: Vec<&TraceEntry> = entries.iter().filter(|e| e.role == Role::Generated).collect();
        if gen.is_empty() {
            return None;
        }
        let dim = gen[0].vector.len();
        let mut mean = vec![0.0; dim];
        for entry in &gen {
            for (m, &x) in mean.iter_mut().zip(&entry.vector) {
                *m += x;
            }
        }
        let n = gen.len() as f64;
        for m in &mut mean {
            *m /= n;
        }
        Some(mean)
    }

    /// JSON Lines dump, one record per (layer, position).
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for (&layer, entries) in &self.layers {
            for e in entries {
                let rec = TraceRecord {
                    layer,
                    position: e.position,
                    role: e.role,
                    vector: e.vector.clone(),
                };
                out.push_str(&serde_json::to_string(&rec).expect("trace record serializes"));
                out.push('\n');
            }
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, serde_json::Error> {
        let mut trace = ActivationTrace::default();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let rec: TraceRecord = serde_json::from_str(line)?;
            trace.record(rec.layer, rec.position, rec.role, rec.vector);
        }
        Ok(trace)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenerationStatus {
    Ok,
    BudgetExhausted,
}

#[derive(Debug, Clone)]
pub struct GenerationResult {
    /// Generated token ids, including the stop token when one was emitted.
    pub tokens: Vec<usize>,
    pub status: GenerationStatus,
    pub trace: Option<ActivationTrace>,
    pub steps_used: usize,
}

impl GenerationResult {
    pub fn ok(&self) -> bool {
        self.status == GenerationStatus::Ok
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_round_trip() {
        let mut trace = ActivationTrace::default();
        trace.record(0, 0, Role::Prompt, vec![1.0, 2.0]);
        trace.record(0, 1, Role::Generated, vec![3.0, 4.0]);
        trace.record(2, 1, Role::Generated, vec![-1.0, 0.5]);
        let text = trace.to_jsonl();
        let back = ActivationTrace::from_jsonl(&text).unwrap();
        assert_eq!(back.layers.len(), 2);
        assert_eq!(back.layers[&0].len(), 2);
        assert_eq!(back.layers[&0][1].vector, vec![3.0, 4.0]);
    }

    #[test]
    fn mean_generated_skips_prompt() {
        let mut trace = ActivationTrace::default();
        trace.record(1, 0, Role::Prompt, vec![100.0, 100.0]);
        trace.record(1, 1, Role::Generated, vec![1.0, 3.0]);
        trace.record(1, 2, Role::Generated, vec![3.0, 5.0]);
        assert_eq!(trace.mean_generated(1).unwrap(), vec![2.0, 4.0]);
        assert!(trace.mean_generated(0).is_none());
    }
}
