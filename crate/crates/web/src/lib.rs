//! wasm-bindgen front end for the static page in `www/`.
//!
//! Each export takes plain strings and returns the same text the command
//! line prints, or throws the error message.

use wasm_bindgen::prelude::*;

use metaqsim::kwise::forrelation::{default_threshold, forrelation_demo};
use metaqsim::query::poly::{parse_bits, TruthTable};
use metaqsim::query::rdeg::rdeg;
use metaqsim::reductions::{apply_pass, Pass};
use metaqsim::{parse_circuit, render_circuit, Rational, Simulator};

pub fn run_text(circuit: &str, input: &str, output_only: bool) -> metaqsim::Result<String> {
    let c = parse_circuit(circuit)?;
    let dist = Simulator::new(&c)?.run_exhaustive(&parse_bits(input.trim())?)?;
    let dist = if output_only { dist.output_only() } else { dist };
    Ok(dist.to_string())
}

pub fn compile_text(circuit: &str, passes: &str) -> metaqsim::Result<String> {
    let mut c = parse_circuit(circuit)?;
    for p in passes.split_whitespace() {
        c = apply_pass(&c, &p.parse::<Pass>()?)?;
    }
    Ok(render_circuit(&c))
}

pub fn rdeg_text(table: &str, eps: &str) -> metaqsim::Result<String> {
    let f = TruthTable::parse(table)?;
    let eps: Rational = eps.trim().parse()?;
    let (d, w) = rdeg(&f, &eps)?;
    Ok(format!("rdeg\t{d}\ndeg\t{}\nwitness\t{w}\n", f.degree()))
}

fn js<T>(r: metaqsim::Result<T>) -> Result<T, JsValue> {
    r.map_err(|e| JsValue::from_str(&e.to_string()))
}

/// Exact outcome distribution of a circuit.
#[wasm_bindgen]
pub fn run(circuit: &str, input: &str, output_only: bool) -> Result<String, JsValue> {
    js(run_text(circuit, input, output_only))
}

/// Applies space-separated passes, e.g. `post2corr` or `amplify:3`.
#[wasm_bindgen]
pub fn compile(circuit: &str, passes: &str) -> Result<String, JsValue> {
    js(compile_text(circuit, passes))
}

/// Rational degree of a truth table with at most four variables.
#[wasm_bindgen]
pub fn rational_degree(table: &str, eps: &str) -> Result<String, JsValue> {
    js(rdeg_text(table, eps))
}

#[wasm_bindgen]
pub fn forrelation(m: u32, seed: u64, trials: usize) -> Result<String, JsValue> {
    js(forrelation_demo(m, seed, trials, default_threshold()).map(|r| r.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const BELL: &str = "qubits 3\nx 2\nh 0\nccx 2 0 1\ncorr [0] [1]\noutput 0\n";

    #[test]
    fn run_matches_cli_text() {
        assert_eq!(run_text(BELL, "", false).unwrap(), "00\t1/2\n11\t1/2\nOUTPUT1\t1/2\n");
        assert!(run_text(BELL, "", true).unwrap().ends_with("OUTPUT1\t1/2\n"));
    }

    #[test]
    fn compile_round_trips() {
        let src = "qubits 2\nh 0\nh 1\npostselect 1\noutput 0\n";
        let out = compile_text(src, "post2corr").unwrap();
        let a = run_text(src, "", true).unwrap();
        let b = run_text(&out, "", true).unwrap();
        assert_eq!(a, b);
        assert!(compile_text(src, "bogus").is_err());
    }

    #[test]
    fn rdeg_of_xor() {
        let out = rdeg_text("00 0\n01 1\n10 1\n11 0\n", "0").unwrap();
        assert!(out.starts_with("rdeg\t1\ndeg\t2\n"), "{out}");
    }
}
