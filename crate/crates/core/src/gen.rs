//! Seeded random mini-circuits for property tests.
//!
//! Generated circuits are always statically valid: quantum ops only target
//! registers that are still quantum, while Toffoli controls may read
//! measured registers (classical control).

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::circuit::{Circuit, CircuitOp, Qubit};

#[derive(Clone, Debug)]
pub struct GenConfig {
    pub qubits: usize,
    pub ops: usize,
    pub measure: bool,
    pub postselect: bool,
    pub corr: bool,
    pub noncollapse: bool,
    /// Upper bound on non-collapsing measurements.
    pub max_noncollapse: usize,
}

impl GenConfig {
    pub fn gates(qubits: usize, ops: usize) -> Self {
        GenConfig {
            qubits,
            ops,
            measure: false,
            postselect: false,
            corr: false,
            noncollapse: false,
            max_noncollapse: 3,
        }
    }

    pub fn with_measure(mut self) -> Self {
        self.measure = true;
        self
    }

    pub fn with_postselect(mut self) -> Self {
        self.postselect = true;
        self
    }

    pub fn with_corr(mut self) -> Self {
        self.corr = true;
        self
    }

    pub fn with_noncollapse(mut self, max: usize) -> Self {
        self.noncollapse = true;
        self.max_noncollapse = max;
        self
    }
}

pub fn random_circuit(cfg: &GenConfig, seed: u64) -> Circuit {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_circuit_with(cfg, &mut rng)
}

pub fn random_circuit_with<R: Rng>(cfg: &GenConfig, rng: &mut R) -> Circuit {
    let n = cfg.qubits.max(1);
    let mut c = Circuit::new(n);
    let mut classical = vec![false; n];
    let mut noncollapse = 0;
    let mut kinds = vec![0u8, 0, 1, 2, 2];
    if cfg.measure {
        kinds.push(3);
    }
    if cfg.postselect {
        kinds.push(4);
    }
    if cfg.corr {
        kinds.extend([5, 5]);
    }
    if cfg.noncollapse {
        kinds.push(6);
    }
    for _ in 0..cfg.ops {
        let quantum: Vec<Qubit> = (0..n).filter(|&q| !classical[q]).collect();
        if quantum.is_empty() {
            break;
        }
        let kind = *kinds.choose(rng).expect("nonempty");
        let op = match kind {
            0 => CircuitOp::Hadamard(*quantum.choose(rng).unwrap()),
            1 => CircuitOp::X(*quantum.choose(rng).unwrap()),
            2 => {
                if n < 3 {
                    continue;
                }
                let t = *quantum.choose(rng).unwrap();
                let mut others: Vec<Qubit> = (0..n).filter(|&q| q != t).collect();
                others.shuffle(rng);
                CircuitOp::Toffoli(others[0], others[1], t)
            }
            3 => {
                let q = *quantum.choose(rng).unwrap();
                classical[q] = true;
                CircuitOp::Measure(vec![q])
            }
            4 => {
                let q = *quantum.choose(rng).unwrap();
                classical[q] = true;
                CircuitOp::Postselect(q)
            }
            5 => {
                let mut pool = quantum.clone();
                pool.shuffle(rng);
                let k = rng.gen_range(1..=pool.len().min(3));
                let j = rng.gen_range(1..=(pool.len() / k).clamp(1, 2));
                let parts: Vec<Vec<Qubit>> = pool.chunks(j).take(k).map(<[Qubit]>::to_vec).collect();
                if parts.len() < k || parts.iter().any(|p| p.len() != j) {
                    continue;
                }
                for &q in parts.iter().flatten() {
                    classical[q] = true;
                }
                CircuitOp::CorrMeasure(parts)
            }
            _ => {
                if noncollapse >= cfg.max_noncollapse {
                    continue;
                }
                noncollapse += 1;
                let q = *quantum.choose(rng).unwrap();
                CircuitOp::NonCollapse(vec![q])
            }
        };
        c.push(op);
    }
    c.output = rng.gen_range(0..n);
    c
}
