//! Checkpoint files: a short text header followed, per network, by one text
//! line describing its shape and a block of little-endian `f32` parameters.
//!
//! ```text
//! ADPCKPT 1
//! config <Td3Config as JSON>
//! updates <u64>
//! meta <caller JSON>
//! nets <count>
//! net <name> <layer count> <sizes, comma separated> <activations, comma separated>
//! <4 · param_count bytes>
//! ...
//! ```

use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2};

use super::mlp::{Activation, Layer, Mlp};
use super::td3::{Td3Agent, Td3Config};
use crate::error::{AdpError, Result};

const MAGIC: &str = "ADPCKPT 1";

/// Decoded checkpoint. Parameters pass through `f32`, so a reload is exact
/// only to single precision.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: Td3Config,
    pub updates: u64,
    pub meta: serde_json::Value,
    pub nets: Vec<(String, Mlp)>,
}

impl Checkpoint {
    pub fn net(&self, name: &str) -> Option<&Mlp> {
        self.nets.iter().find(|(n, _)| n == name).map(|(_, m)| m)
    }

    /// Rebuilds an agent with fresh optimizer state.
    pub fn into_agent(self) -> Result<Td3Agent> {
        let take = |name: &str| {
            self.net(name)
                .cloned()
                .ok_or_else(|| AdpError::Parse(format!("checkpoint lacks net {name}")))
        };
        Ok(Td3Agent::from_nets(
            self.config.clone(),
            take("actor")?,
            take("critic1")?,
            take("critic2")?,
            take("actor_target")?,
            take("critic1_target")?,
            take("critic2_target")?,
            self.updates,
        ))
    }
}

pub fn write_checkpoint(agent: &Td3Agent, meta: &serde_json::Value) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    let config = serde_json::to_string(&agent.cfg).map_err(|e| AdpError::Parse(e.to_string()))?;
    writeln!(out, "{MAGIC}")?;
    writeln!(out, "config {config}")?;
    writeln!(out, "updates {}", agent.updates)?;
    writeln!(out, "meta {meta}")?;
    let nets = agent.nets();
    writeln!(out, "nets {}", nets.len())?;
    for (name, net) in nets {
        let sizes: Vec<String> = net.sizes().iter().map(usize::to_string).collect();
        let acts: Vec<&str> = (0..net.layers().len()).map(|l| net.activation(l).tag()).collect();
        writeln!(
            out,
            "net {name} {} {} {}",
            net.layers().len(),
            sizes.join(","),
            acts.join(",")
        )?;
        for p in net.params() {
            out.extend_from_slice(&(p as f32).to_le_bytes());
        }
    }
    Ok(out)
}

pub fn save_checkpoint(path: &Path, agent: &Td3Agent, meta: &serde_json::Value) -> Result<()> {
    std::fs::write(path, write_checkpoint(agent, meta)?)?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn line(&mut self) -> Result<&'a str> {
        let rest = &self.bytes[self.pos..];
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| AdpError::Parse("truncated checkpoint header".into()))?;
        self.pos += end + 1;
        std::str::from_utf8(&rest[..end]).map_err(|e| AdpError::Parse(e.to_string()))
    }

    fn keyed(&mut self, key: &str) -> Result<&'a str> {
        let line = self.line()?;
        line.strip_prefix(key)
            .and_then(|r| r.strip_prefix(' '))
            .ok_or_else(|| AdpError::Parse(format!("expected `{key}` line, found `{line}`")))
    }

    fn floats(&mut self, n: usize) -> Result<Vec<f64>> {
        let len = n * 4;
        if self.bytes.len() - self.pos < len {
            return Err(AdpError::Parse("truncated parameter block".into()));
        }
        let block = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        Ok(block
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect())
    }
}

fn parse_num<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| AdpError::Parse(format!("bad {what}: `{s}`")))
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.line()? != MAGIC {
        return Err(AdpError::Parse("not a checkpoint (bad magic)".into()));
    }
    let config: Td3Config = serde_json::from_str(c.keyed("config")?).map_err(|e| AdpError::Parse(e.to_string()))?;
    let updates = parse_num(c.keyed("updates")?, "update count")?;
    let meta = serde_json::from_str(c.keyed("meta")?).map_err(|e| AdpError::Parse(e.to_string()))?;
    let count: usize = parse_num(c.keyed("nets")?, "net count")?;
    let mut nets = Vec::with_capacity(count);
    for _ in 0..count {
        let fields: Vec<&str> = c.keyed("net")?.split(' ').collect();
        let [name, layers, sizes, acts] = fields[..] else {
            return Err(AdpError::Parse(
                "net line needs name, layer count, sizes and activations".into(),
            ));
        };
        let layers: usize = parse_num(layers, "layer count")?;
        let sizes: Vec<usize> = sizes
            .split(',')
            .map(|s| parse_num(s, "layer size"))
            .collect::<Result<_>>()?;
        let acts: Vec<Activation> = acts
            .split(',')
            .map(|t| Activation::from_tag(t).ok_or_else(|| AdpError::Parse(format!("unknown activation `{t}`"))))
            .collect::<Result<_>>()?;
        if sizes.len() != layers + 1 || acts.len() != layers || layers == 0 {
            return Err(AdpError::Parse(format!("inconsistent shape for net {name}")));
        }
        if acts[..layers - 1].iter().any(|a| *a != Activation::Relu) {
            return Err(AdpError::Parse(format!("net {name}: hidden layers must be relu")));
        }
        let mut ls = Vec::with_capacity(layers);
        for p in sizes.windows(2) {
            let w = c.floats(p[0] * p[1])?;
            let b = c.floats(p[1])?;
            ls.push(Layer {
                weight: Array2::from_shape_vec((p[1], p[0]), w).expect("length checked"),
                bias: Array1::from(b),
            });
        }
        nets.push((name.to_string(), Mlp::from_layers(ls, acts[layers - 1])?));
    }
    if c.pos != bytes.len() {
        return Err(AdpError::Parse("trailing bytes after last net".into()));
    }
    Ok(Checkpoint {
        config,
        updates,
        meta,
        nets,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    read_checkpoint(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn agent() -> Td3Agent {
        let cfg = Td3Config {
            actor_hidden: vec![5],
            critic_hidden: vec![6, 4],
            ..Td3Config::default()
        };
        Td3Agent::new(4, 2, cfg, 3).unwrap()
    }

    #[test]
    fn round_trip_is_exact_to_single_precision() {
        let a = agent();
        let meta = serde_json::json!({"obs_dim": 4, "act_dim": 2});
        let bytes = write_checkpoint(&a, &meta).unwrap();
        assert!(bytes.starts_with(b"ADPCKPT 1\n"));
        let ck = read_checkpoint(&bytes).unwrap();
        assert_eq!(ck.meta, meta);
        assert_eq!(ck.config, a.cfg);
        for (name, net) in a.nets() {
            let loaded = ck.net(name).unwrap();
            assert_eq!(loaded.sizes(), net.sizes());
            for (x, y) in loaded.params().iter().zip(net.params()) {
                assert_eq!(*x, y as f32 as f64);
            }
        }
        // Written twice, the bytes agree; re-written after a reload they agree too.
        assert_eq!(
            write_checkpoint(&ck.clone().into_agent().unwrap(), &meta).unwrap(),
            bytes
        );
    }

    #[test]
    fn rejects_corruption() {
        let bytes = write_checkpoint(&agent(), &serde_json::Value::Null).unwrap();
        assert!(read_checkpoint(&bytes[..bytes.len() - 1]).is_err());
        assert!(read_checkpoint(b"ADPCKPT 2\n").is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(read_checkpoint(&extra).is_err());
    }
}
