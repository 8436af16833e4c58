//! `DNET` weight files and their JSON manifest.
//!
//! ```text
//! "DNET" | version u32 | descriptor_len u32 | param_count u32      (16 bytes)
//! descriptor: n_direction u32 | n_position u32 | n_trunk u32
//!             (in u32, out u32, activation u32) per layer
//!             skip_kind u32 (0 none, 1 concat) | skip_layer u32
//! params: f32 * param_count, layer by layer, weights (out x in, row-major) then biases
//! ```
//! All integers and floats are little-endian.

use serde::{Deserialize, Serialize};

use super::{Activation, Arch, DslfNet, LayerSpec, NetError, Skip};

pub const DNET_MAGIC: &[u8; 4] = b"DNET";
pub const DNET_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 16;

fn descriptor(arch: &Arch) -> Vec<u32> {
    let mut d = vec![
        arch.direction.len() as u32,
        arch.position.len() as u32,
        arch.trunk.len() as u32,
    ];
    for l in arch.layers() {
        d.extend_from_slice(&[l.in_dim as u32, l.out_dim as u32, l.activation.code()]);
    }
    match arch.skip {
        Skip::None => d.extend_from_slice(&[0, 0]),
        Skip::Concat { layer } => d.extend_from_slice(&[1, layer as u32]),
    }
    d
}

pub(super) fn to_bytes(net: &DslfNet) -> Vec<u8> {
    let desc = descriptor(&net.arch);
    let mut out = Vec::with_capacity(HEADER_LEN + desc.len() * 4 + net.params.len() * 4);
    out.extend_from_slice(DNET_MAGIC);
    out.extend_from_slice(&DNET_VERSION.to_le_bytes());
    out.extend_from_slice(&((desc.len() * 4) as u32).to_le_bytes());
    out.extend_from_slice(&(net.params.len() as u32).to_le_bytes());
    for v in desc {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for p in &net.params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

fn u32_at(bytes: &[u8], off: usize) -> Result<u32, NetError> {
    bytes
        .get(off..off + 4)
        .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
        .ok_or_else(|| NetError::Format(format!("truncated at byte {off}")))
}

pub(super) fn from_bytes(bytes: &[u8]) -> Result<DslfNet, NetError> {
    if bytes.len() < 4 || &bytes[..4] != DNET_MAGIC {
        return Err(NetError::Magic);
    }
    let version = u32_at(bytes, 4)?;
    if version != DNET_VERSION {
        return Err(NetError::Version(version));
    }
    let desc_len = u32_at(bytes, 8)? as usize;
    let count = u32_at(bytes, 12)? as usize;
    if desc_len % 4 != 0 || desc_len < 20 {
        return Err(NetError::Format("bad descriptor length".into()));
    }
    let desc: Vec<u32> = (0..desc_len / 4)
        .map(|i| u32_at(bytes, HEADER_LEN + 4 * i))
        .collect::<Result<_, _>>()?;
    let (nd, np, nt) = (desc[0] as usize, desc[1] as usize, desc[2] as usize);
    let total = nd + np + nt;
    if desc.len() != 3 + 3 * total + 2 {
        return Err(NetError::Format(
            "descriptor does not match layer counts".into(),
        ));
    }
    let mut layers = Vec::with_capacity(total);
    for i in 0..total {
        let d = &desc[3 + 3 * i..6 + 3 * i];
        let activation = Activation::from_code(d[2])
            .ok_or_else(|| NetError::Format(format!("unknown activation code {}", d[2])))?;
        layers.push(LayerSpec {
            in_dim: d[0] as usize,
            out_dim: d[1] as usize,
            activation,
        });
    }
    let skip = match (desc[3 + 3 * total], desc[4 + 3 * total]) {
        (0, _) => Skip::None,
        (1, layer) => Skip::Concat {
            layer: layer as usize,
        },
        (kind, _) => return Err(NetError::Format(format!("unknown skip kind {kind}"))),
    };
    let arch = Arch {
        direction: layers[..nd].to_vec(),
        position: layers[nd..nd + np].to_vec(),
        trunk: layers[nd + np..].to_vec(),
        skip,
    };
    arch.validate()?;
    if arch.param_count() != count {
        return Err(NetError::Format(format!(
            "header says {count} parameters, architecture needs {}",
            arch.param_count()
        )));
    }
    let start = HEADER_LEN + desc_len;
    let expected = start + 4 * count;
    if bytes.len() != expected {
        return Err(NetError::Format(format!(
            "expected {expected} bytes, found {}",
            bytes.len()
        )));
    }
    let params = bytes[start..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    DslfNet::from_params(arch, params)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerManifest {
    pub stream: String,
    pub index: usize,
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
    /// Byte offset of the weights inside the DNET file.
    pub weight_offset: usize,
    pub bias_offset: usize,
}

/// Everything a reader needs to run the network without parsing the descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetManifest {
    pub format: String,
    pub version: u32,
    pub input_dim: usize,
    pub input_layout: Vec<String>,
    pub direction_columns: [usize; 2],
    pub position_columns: [usize; 2],
    pub feature_concat: Vec<String>,
    pub skip: Skip,
    pub skip_concat: Vec<String>,
    pub output_decode: String,
    pub layers: Vec<LayerManifest>,
    pub param_offset: usize,
    pub param_count: usize,
    pub file_size: usize,
}

pub(super) fn manifest(net: &DslfNet) -> NetManifest {
    let arch = &net.arch;
    let param_offset = HEADER_LEN + descriptor(arch).len() * 4;
    let mut off = param_offset;
    let mut layers = Vec::new();
    let parts: [(&str, &[LayerSpec]); 3] = [
        ("direction", &arch.direction),
        ("position", &arch.position),
        ("trunk", &arch.trunk),
    ];
    for (stream, ls) in parts {
        for (index, l) in ls.iter().enumerate() {
            let weight_offset = off;
            let bias_offset = off + 4 * l.in_dim * l.out_dim;
            off = bias_offset + 4 * l.out_dim;
            layers.push(LayerManifest {
                stream: stream.into(),
                index,
                in_dim: l.in_dim,
                out_dim: l.out_dim,
                activation: l.activation,
                weight_offset,
                bias_offset,
            });
        }
    }
    NetManifest {
        format: "DNET".into(),
        version: DNET_VERSION,
        input_dim: 5,
        input_layout: ["2u-1", "2v-1", "dx", "dy", "dz"]
            .map(String::from)
            .to_vec(),
        direction_columns: [2, 5],
        position_columns: [0, 2],
        feature_concat: vec!["direction".into(), "position".into()],
        skip: arch.skip,
        skip_concat: vec!["previous".into(), "features".into()],
        output_decode: "residual = 2q - 1; color = clamp(diffuse + residual, 0, 1)".into(),
        layers,
        param_offset,
        param_count: net.params.len(),
        file_size: off,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn size_arithmetic() {
        let net = DslfNet::init(Arch::toy(true), 3).unwrap();
        let bytes = net.to_bytes();
        let layers = net.arch().layers().count();
        assert_eq!(
            bytes.len(),
            16 + 4 * (3 + 3 * layers + 2) + 4 * net.arch().param_count()
        );
        assert_eq!(net.manifest().file_size, bytes.len());
    }

    #[test]
    fn round_trip_and_truncation() {
        let net = DslfNet::init(Arch::toy(true), 3).unwrap();
        let bytes = net.to_bytes();
        assert_eq!(DslfNet::from_bytes(&bytes).unwrap(), net);
        for cut in [0, 3, 10, 17, bytes.len() - 1] {
            assert!(DslfNet::from_bytes(&bytes[..cut]).is_err());
        }
        let mut bad = bytes.clone();
        bad[4] = 2;
        assert!(matches!(
            DslfNet::from_bytes(&bad),
            Err(NetError::Version(2))
        ));
    }
}
