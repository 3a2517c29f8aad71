//! Plain-text network checkpoints.
//!
//! ```text
//! # slamorl checkpoint v1
//! actor 21 128 64 9
//! <one parameter per line, layer-major, weights row-major then biases>
//! critic 30 128 64 1
//! <...>
//! ```
//!
//! Values are written with Rust's shortest round-trip float formatting, so a
//! save/load cycle is exact.

use std::io::{BufRead, Write};

use super::{ActorCritic, Mlp};
use crate::error::{Error, Result};

const MAGIC: &str = "# slamorl checkpoint v1";

pub fn write_checkpoint(agent: &ActorCritic, mut out: impl Write) -> Result<()> {
    writeln!(out, "{MAGIC}")?;
    for (name, net) in [("actor", &agent.actor), ("critic", &agent.critic)] {
        let sizes: Vec<String> = net.sizes().iter().map(|s| s.to_string()).collect();
        writeln!(out, "{name} {}", sizes.join(" "))?;
        for p in net.params() {
            writeln!(out, "{p}")?;
        }
    }
    Ok(())
}

/// Reads `(actor, critic)` back.
pub fn read_checkpoint(input: impl BufRead) -> Result<(Mlp, Mlp)> {
    let bad = |line: usize, msg: String| Error::Config(format!("checkpoint line {line}: {msg}"));
    let mut lines = input.lines().enumerate();
    match lines.next() {
        Some((_, Ok(l))) if l.trim() == MAGIC => {}
        _ => return Err(bad(1, "missing checkpoint header".into())),
    }
    let mut nets = Vec::with_capacity(2);
    for expected in ["actor", "critic"] {
        let (no, header) = lines.next().ok_or_else(|| bad(0, format!("missing {expected} section")))?;
        let header = header?;
        let mut fields = header.split_whitespace();
        if fields.next() != Some(expected) {
            return Err(bad(no + 1, format!("expected '{expected}' section, found '{header}'")));
        }
        let sizes = fields
            .map(|f| f.parse::<usize>().map_err(|e| bad(no + 1, e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(bad(no + 1, format!("invalid layer sizes {sizes:?}")));
        }
        let mut net = Mlp::zeros(&sizes);
        let mut values = Vec::with_capacity(net.num_params());
        for _ in 0..net.num_params() {
            let (no, line) = lines.next().ok_or_else(|| bad(0, format!("truncated {expected} parameters")))?;
            let v: f64 = line?.trim().parse().map_err(|e| bad(no + 1, format!("{e}")))?;
            values.push(v);
        }
        net.set_params(&values)?;
        nets.push(net);
    }
    let critic = nets.pop().unwrap();
    let actor = nets.pop().unwrap();
    Ok((actor, critic))
}
