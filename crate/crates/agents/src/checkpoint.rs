//! Binary checkpoint of every agent's parameters.
//!
//! Layout, little-endian: magic `CDMRCKPT`, `u32` version, `u32` agent
//! count; per agent a length-prefixed id (`inter`, `intra-<d>`) followed by
//! the actor then the critic, each as `u32` size count, the `u32` layer
//! sizes, and the `f64` parameters in [`Mlp::params`] order.

use crate::actor_critic::ActorCritic;
use crate::error::{Error, Result};
use crate::mlp::Mlp;
use crate::train::{AgentId, MultiAgent};

const MAGIC: &[u8; 8] = b"CDMRCKPT";
pub const VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, x: usize) {
    out.extend_from_slice(&u32::try_from(x).expect("checkpoint field fits in u32").to_le_bytes());
}

fn put_mlp(out: &mut Vec<u8>, net: &Mlp) {
    let sizes = net.sizes();
    put_u32(out, sizes.len());
    for s in sizes {
        put_u32(out, s);
    }
    for p in net.params() {
        out.extend_from_slice(&p.to_le_bytes());
    }
}

pub fn encode(agents: &MultiAgent) -> Vec<u8> {
    let mut out = MAGIC.to_vec();
    put_u32(&mut out, VERSION as usize);
    put_u32(&mut out, agents.agents().count());
    for a in agents.agents() {
        let id = a.id.to_string();
        put_u32(&mut out, id.len());
        out.extend_from_slice(id.as_bytes());
        put_mlp(&mut out, &a.net.actor);
        put_mlp(&mut out, &a.net.critic);
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() < n {
            return Err(Error::Checkpoint("truncated file".into()));
        }
        let (head, tail) = self.bytes.split_at(n);
        self.bytes = tail;
        Ok(head)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn mlp(&mut self) -> Result<Mlp> {
        let count = self.u32()?;
        if !(2..=16).contains(&count) {
            return Err(Error::Checkpoint(format!("implausible layer count {count}")));
        }
        let sizes = (0..count).map(|_| self.u32()).collect::<Result<Vec<_>>>()?;
        if sizes.contains(&0) {
            return Err(Error::Checkpoint("zero-width layer".into()));
        }
        let mut net = Mlp::zeros(&sizes);
        let raw = self.take(net.param_count() * 8)?;
        let params: Vec<f64> =
            raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        if !params.iter().all(|p| p.is_finite()) {
            return Err(Error::CorruptParams("checkpoint"));
        }
        net.set_params(&params);
        Ok(net)
    }
}

pub fn decode(bytes: &[u8]) -> Result<Vec<(AgentId, ActorCritic)>> {
    let mut r = Reader { bytes };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint file".into()));
    }
    let version = r.u32()?;
    if version != VERSION as usize {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let count = r.u32()?;
    let mut out = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let len = r.u32()?;
        let id = std::str::from_utf8(r.take(len)?).map_err(|_| Error::Checkpoint("agent id is not UTF-8".into()))?;
        let id: AgentId = id.parse()?;
        let actor = r.mlp()?;
        let critic = r.mlp()?;
        if critic.output_len() != 1 || critic.input_len() != actor.input_len() {
            return Err(Error::Checkpoint(format!("agent {id}: critic shape does not match actor")));
        }
        out.push((id, ActorCritic { actor, critic }));
    }
    if !r.bytes.is_empty() {
        return Err(Error::Checkpoint("trailing bytes".into()));
    }
    Ok(out)
}
