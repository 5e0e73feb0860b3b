use std::io::{Read, Write};
use std::path::Path;

use crate::scalar::Real;

use super::network::NetworkState;
use super::spec::NetworkSpec;
use super::NetError;

pub const NETWORK_MAGIC: &[u8; 4] = b"AFNN";
pub const NETWORK_FORMAT_VERSION: u32 = 1;

/// `AFNN`, version (u32), spec text length (u32) and UTF-8 text, parameter
/// count (u64), then every parameter as a little-endian f64.
pub fn network_to_bytes<T: Real>(net: &NetworkState<T>) -> Vec<u8> {
    let spec = net.spec().to_string();
    let mut out = Vec::with_capacity(24 + spec.len() + 8 * net.parameter_count());
    out.extend_from_slice(NETWORK_MAGIC);
    out.extend_from_slice(&NETWORK_FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(spec.len() as u32).to_le_bytes());
    out.extend_from_slice(spec.as_bytes());
    out.extend_from_slice(&(net.parameter_count() as u64).to_le_bytes());
    for p in net.params() {
        out.extend_from_slice(&p.as_f64().to_le_bytes());
    }
    out
}

pub fn network_from_bytes<T: Real>(bytes: &[u8]) -> Result<NetworkState<T>, NetError> {
    let mut r = bytes;
    let mut magic = [0u8; 4];
    read_exact(&mut r, &mut magic)?;
    let mut word = [0u8; 4];
    read_exact(&mut r, &mut word)?;
    let version = u32::from_le_bytes(word);
    if &magic != NETWORK_MAGIC || version != NETWORK_FORMAT_VERSION {
        return Err(NetError::Version { magic: String::from_utf8_lossy(&magic).into_owned(), version });
    }
    read_exact(&mut r, &mut word)?;
    let len = u32::from_le_bytes(word) as usize;
    if len > r.len() {
        return Err(NetError::Corrupt("truncated spec".into()));
    }
    let (text, rest) = r.split_at(len);
    r = rest;
    let spec: NetworkSpec = std::str::from_utf8(text)
        .map_err(|_| NetError::Corrupt("spec is not UTF-8".into()))?
        .parse()?;
    let mut long = [0u8; 8];
    read_exact(&mut r, &mut long)?;
    let count = u64::from_le_bytes(long) as usize;
    if r.len() != count * 8 {
        return Err(NetError::Corrupt(format!("expected {} parameter bytes, found {}", count * 8, r.len())));
    }
    let params = r
        .chunks_exact(8)
        .map(|c| T::lit(f64::from_le_bytes(c.try_into().expect("8 bytes"))))
        .collect();
    NetworkState::from_params(spec, params)
}

fn read_exact(r: &mut &[u8], buf: &mut [u8]) -> Result<(), NetError> {
    r.read_exact(buf).map_err(|_| NetError::Corrupt("truncated file".into()))
}

pub fn save_network<T: Real>(net: &NetworkState<T>, path: impl AsRef<Path>) -> Result<(), NetError> {
    let mut f = std::fs::File::create(path.as_ref())?;
    f.write_all(&network_to_bytes(net))?;
    Ok(())
}

pub fn load_network<T: Real>(path: impl AsRef<Path>) -> Result<NetworkState<T>, NetError> {
    network_from_bytes(&std::fs::read(path.as_ref())?)
}
