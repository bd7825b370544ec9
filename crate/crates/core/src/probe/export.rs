//! Text export of key-neuron sets.
//!
//! ```text
//! #dims<TAB>L<TAB>dm<TAB>provenance
//! l<TAB>j
//! ...
//! ```
//!
//! Rows are sorted by layer, then neuron.

use std::fmt::Write as _;

use super::{KeyNeuronSet, NeuronId, ProbeError};

pub fn write_key_set(set: &KeyNeuronSet) -> String {
    let (layers, width) = set.dims();
    let mut out = format!("#dims\t{layers}\t{width}\t{}\n", set.provenance);
    for n in set.iter() {
        let _ = writeln!(out, "{}\t{}", n.layer, n.neuron);
    }
    out
}

pub fn read_key_set(text: &str) -> Result<KeyNeuronSet, ProbeError> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| ProbeError::Format("missing #dims header".into()))?;
    let fields: Vec<&str> = header.splitn(4, '\t').collect();
    if fields.len() < 3 || fields[0] != "#dims" {
        return Err(ProbeError::Format(format!("bad header line {header:?}")));
    }
    let parse = |s: &str, what: &str| -> Result<usize, ProbeError> {
        s.parse()
            .map_err(|_| ProbeError::Format(format!("bad {what}: {s:?}")))
    };
    let layers = parse(fields[1], "layer count")?;
    let width = parse(fields[2], "ffn width")?;
    let provenance = fields.get(3).copied().unwrap_or_default();
    let mut set = KeyNeuronSet::empty(layers, width, provenance);
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let (l, j) = line
            .split_once('\t')
            .ok_or_else(|| ProbeError::Format(format!("bad row {line:?}")))?;
        set.insert(NeuronId::new(parse(j, "neuron")?, parse(l, "layer")?))?;
    }
    Ok(set)
}
