//! Binary model checkpoints.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic        8 bytes  "DGSPNET\0"
//! version      u32      1
//! role         u8       0 = actor, 1 = critic
//! hidden act   u8       0 = tanh, 1 = softplus, 2 = identity
//! output act   u8
//! n_dims       u32
//! dims         n_dims x u32          input, hidden..., output
//! has_norm     u8
//! norm mean    dims[0] x f64         present when has_norm = 1
//! norm scale   dims[0] x f64
//! n_params     u64
//! params       n_params x f64        per layer: row-major weights (out x in), then bias
//! ```

use std::io::{Read, Write};
use std::path::Path;

use super::actor::Actor;
use super::critic::Critic;
use super::mlp::{Activation, Mlp};
use super::normalize::Standardizer;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"DGSPNET\0";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Actor,
    Critic,
}

fn write_net<W: Write>(
    w: &mut W,
    role: Role,
    net: &Mlp,
    norm: Option<&Standardizer>,
) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&[
        match role {
            Role::Actor => 0,
            Role::Critic => 1,
        },
        net.hidden_activation().code(),
        net.output_activation().code(),
    ])?;
    w.write_all(&(net.dims().len() as u32).to_le_bytes())?;
    for &d in net.dims() {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    match norm {
        Some(n) => {
            w.write_all(&[1])?;
            for &x in n.mean.iter().chain(&n.scale) {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        None => w.write_all(&[0])?,
    }
    w.write_all(&(net.num_params() as u64).to_le_bytes())?;
    for &p in net.params() {
        w.write_all(&p.to_le_bytes())?;
    }
    Ok(())
}

fn read_u8<R: Read>(r: &mut R) -> Result<u8> {
    let mut b = [0u8; 1];
    r.read_exact(&mut b)?;
    Ok(b[0])
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(n);
    let mut b = [0u8; 8];
    for _ in 0..n {
        r.read_exact(&mut b)?;
        out.push(f64::from_le_bytes(b));
    }
    Ok(out)
}

fn read_net<R: Read>(r: &mut R) -> Result<(Role, Mlp, Option<Standardizer>)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = read_u32(r)?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let role = match read_u8(r)? {
        0 => Role::Actor,
        1 => Role::Critic,
        x => return Err(Error::Checkpoint(format!("unknown role {x}"))),
    };
    let act = |c: u8| {
        Activation::from_code(c).ok_or_else(|| Error::Checkpoint(format!("unknown activation {c}")))
    };
    let hidden = act(read_u8(r)?)?;
    let output = act(read_u8(r)?)?;
    let n_dims = read_u32(r)? as usize;
    if !(2..=64).contains(&n_dims) {
        return Err(Error::Checkpoint(format!(
            "implausible layer count {n_dims}"
        )));
    }
    let dims = (0..n_dims)
        .map(|_| read_u32(r).map(|d| d as usize))
        .collect::<Result<Vec<_>>>()?;
    let norm = match read_u8(r)? {
        0 => None,
        1 => {
            let mean = read_f64s(r, dims[0])?;
            let scale = read_f64s(r, dims[0])?;
            Some(Standardizer { mean, scale })
        }
        x => return Err(Error::Checkpoint(format!("bad normalizer flag {x}"))),
    };
    let n_params = read_u64(r)? as usize;
    let expected = Mlp::zeros(&dims, hidden, output)?.num_params();
    if n_params != expected {
        return Err(Error::Checkpoint(format!(
            "{n_params} parameters, architecture needs {expected}"
        )));
    }
    let params = read_f64s(r, n_params)?;
    Ok((role, Mlp::from_params(&dims, hidden, output, params)?, norm))
}

pub fn write_actor<W: Write>(w: &mut W, actor: &Actor) -> Result<()> {
    write_net(w, Role::Actor, actor.net(), actor.normalizer())
}

pub fn read_actor<R: Read>(r: &mut R) -> Result<Actor> {
    match read_net(r)? {
        (Role::Actor, net, norm) => Actor::from_parts(net, norm),
        _ => Err(Error::Checkpoint(
            "checkpoint holds a critic, not an actor".into(),
        )),
    }
}

pub fn write_critic<W: Write>(w: &mut W, critic: &Critic) -> Result<()> {
    write_net(w, Role::Critic, critic.net(), critic.normalizer())
}

pub fn read_critic<R: Read>(r: &mut R) -> Result<Critic> {
    match read_net(r)? {
        (Role::Critic, net, norm) => Critic::from_parts(net, norm),
        _ => Err(Error::Checkpoint(
            "checkpoint holds an actor, not a critic".into(),
        )),
    }
}

pub fn save_actor(path: &Path, actor: &Actor) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_actor(&mut f, actor)?;
    f.flush()?;
    Ok(())
}

pub fn load_actor(path: &Path) -> Result<Actor> {
    read_actor(&mut std::io::BufReader::new(std::fs::File::open(path)?))
}

pub fn save_critic(path: &Path, critic: &Critic) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_critic(&mut f, critic)?;
    f.flush()?;
    Ok(())
}

pub fn load_critic(path: &Path) -> Result<Critic> {
    read_critic(&mut std::io::BufReader::new(std::fs::File::open(path)?))
}
