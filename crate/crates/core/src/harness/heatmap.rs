use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::model::{gate_activations, BranchGateMap, GcnParams};
use crate::text::Vocabulary;

/// Writes one CSV per convolution width to `dir/{stem}_h{width}.csv`.
/// Columns: `position`, `ngram`, one per filter, then `mean`; one row per
/// input position.
pub fn export_gate_heatmap(
    params: &GcnParams,
    vocab: &Vocabulary,
    tokens: &[String],
    dir: impl AsRef<Path>,
    stem: &str,
) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let maps = gate_activations(params, vocab, tokens)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    maps.iter()
        .map(|m| {
            let path = dir.join(format!("{stem}_h{}.csv", m.kernel_size));
            write_map(m, &path)?;
            Ok(path)
        })
        .collect()
}

fn write_map(m: &BranchGateMap, path: &Path) -> Result<()> {
    let (n, f) = (m.values.shape()[0], m.values.shape()[1]);
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["position".to_string(), "ngram".to_string()];
    header.extend((0..f).map(|j| format!("f{j}")));
    header.push("mean".into());
    w.write_record(&header)?;
    for i in 0..n {
        let mut rec = vec![i.to_string(), m.ngrams[i].clone()];
        rec.extend(m.values.data()[i * f..(i + 1) * f].iter().map(f64::to_string));
        rec.push(m.mean[i].to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
