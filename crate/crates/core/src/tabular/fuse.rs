use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lld::Spectrogram;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    AudioSummary,
    Metadata,
    FlatSpectrogram,
    FlatMfcc,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutBlock {
    pub kind: BlockKind,
    pub offset: usize,
    pub len: usize,
}

/// Block order and sizes of a fused vector: audio | metadata | flattened blocks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FusionLayout {
    pub blocks: Vec<LayoutBlock>,
}

impl FusionLayout {
    /// Builds a layout from `(kind, len)` pairs, skipping empty blocks.
    pub fn new(blocks: &[(BlockKind, usize)]) -> Self {
        let mut offset = 0;
        let blocks = blocks
            .iter()
            .filter(|(_, len)| *len > 0)
            .map(|&(kind, len)| {
                let b = LayoutBlock { kind, offset, len };
                offset += len;
                b
            })
            .collect();
        Self { blocks }
    }

    pub fn total_len(&self) -> usize {
        self.blocks.last().map_or(0, |b| b.offset + b.len)
    }

    pub fn block(&self, kind: BlockKind) -> Option<&LayoutBlock> {
        self.blocks.iter().find(|b| b.kind == kind)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusedVector {
    pub clip_id: String,
    pub values: Vec<f64>,
    pub layout: FusionLayout,
}

impl FusedVector {
    pub fn block(&self, kind: BlockKind) -> Option<&[f64]> {
        self.layout
            .block(kind)
            .map(|b| &self.values[b.offset..b.offset + b.len])
    }
}

/// Concatenates the configured blocks in layout order.
///
/// Every block the layout names must be supplied with the recorded length,
/// and no unlisted block may be supplied.
pub fn fuse(
    layout: &FusionLayout,
    clip_id: &str,
    parts: &[(BlockKind, &[f64])],
) -> Result<FusedVector> {
    if parts.len() != layout.blocks.len() {
        return Err(Error::Layout {
            expected: layout.blocks.len(),
            actual: parts.len(),
        });
    }
    let mut values = Vec::with_capacity(layout.total_len());
    for b in &layout.blocks {
        let (_, data) = parts
            .iter()
            .find(|(k, _)| *k == b.kind)
            .ok_or_else(|| Error::Config(format!("clip {clip_id}: missing {:?} block", b.kind)))?;
        if data.len() != b.len {
            return Err(Error::Layout {
                expected: b.len,
                actual: data.len(),
            });
        }
        values.extend_from_slice(data);
    }
    Ok(FusedVector {
        clip_id: clip_id.to_string(),
        values,
        layout: layout.clone(),
    })
}

/// Center-crops or pads the time axis to `target_frames` and flattens
/// row-major (one row after another). Padding frames repeat the grid's
/// silence column, split evenly with any odd frame on the right.
pub fn flatten_spectrogram(s: &Spectrogram<f64>, target_frames: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(s.n_rows * target_frames);
    let t = s.n_frames;
    let (start, left_pad) = if t >= target_frames {
        ((t - target_frames) / 2, 0)
    } else {
        (0, (target_frames - t) / 2)
    };
    for r in 0..s.n_rows {
        let row = s.row(r);
        for j in 0..target_frames {
            let v = if t >= target_frames {
                row[start + j]
            } else if j >= left_pad && j < left_pad + t {
                row[j - left_pad]
            } else {
                s.silence[r]
            };
            out.push(v);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(rows: usize, frames: usize) -> Spectrogram<f64> {
        Spectrogram {
            n_rows: rows,
            n_frames: frames,
            values: (0..rows * frames).map(|i| i as f64).collect(),
            silence: vec![-23.0; rows],
        }
    }

    #[test]
    fn flatten_no_op() {
        let g = grid(128, 24);
        let flat = flatten_spectrogram(&g, 24);
        assert_eq!(flat.len(), 3072);
        assert_eq!(flat, g.values);
    }

    #[test]
    fn flatten_crop_keeps_center() {
        let g = grid(128, 30);
        let flat = flatten_spectrogram(&g, 24);
        assert_eq!(flat.len(), 3072);
        for r in 0..128 {
            assert_eq!(&flat[r * 24..(r + 1) * 24], &g.row(r)[3..27]);
        }
    }

    #[test]
    fn flatten_pad_is_symmetric() {
        let g = grid(128, 10);
        let flat = flatten_spectrogram(&g, 24);
        for r in 0..128 {
            let row = &flat[r * 24..(r + 1) * 24];
            assert!(row[..7].iter().all(|&v| v == -23.0));
            assert!(row[17..].iter().all(|&v| v == -23.0));
            assert_eq!(&row[7..17], g.row(r));
        }
    }

    #[test]
    fn fuse_lengths_and_projection() {
        let audio: Vec<f64> = (0..84).map(f64::from).collect();
        let meta: Vec<f64> = (0..16).map(|i| -f64::from(i)).collect();
        let flat = vec![0.5; 3072];
        let l = FusionLayout::new(&[(BlockKind::AudioSummary, 84), (BlockKind::Metadata, 16)]);
        let v = fuse(
            &l,
            "c",
            &[(BlockKind::AudioSummary, &audio), (BlockKind::Metadata, &meta)],
        )
        .unwrap();
        assert_eq!(v.values.len(), 100);
        assert_eq!(v.block(BlockKind::Metadata).unwrap(), meta.as_slice());

        let l = FusionLayout::new(&[
            (BlockKind::AudioSummary, 84),
            (BlockKind::Metadata, 16),
            (BlockKind::FlatSpectrogram, 3072),
        ]);
        let v = fuse(
            &l,
            "c",
            &[
                (BlockKind::FlatSpectrogram, &flat),
                (BlockKind::AudioSummary, &audio),
                (BlockKind::Metadata, &meta),
            ],
        )
        .unwrap();
        assert_eq!(v.values.len(), 3172);
        assert_eq!(v.block(BlockKind::AudioSummary).unwrap(), audio.as_slice());
        assert_eq!(v.block(BlockKind::FlatSpectrogram).unwrap(), flat.as_slice());
    }

    #[test]
    fn cough_only_layout_and_mismatch() {
        let l = FusionLayout::new(&[(BlockKind::AudioSummary, 84), (BlockKind::Metadata, 0)]);
        assert_eq!(l.blocks.len(), 1);
        let short = vec![0.0; 80];
        assert!(matches!(
            fuse(&l, "c", &[(BlockKind::AudioSummary, &short)]),
            Err(Error::Layout { .. })
        ));
        let audio = vec![0.0; 84];
        let meta = vec![0.0; 16];
        assert!(fuse(
            &l,
            "c",
            &[(BlockKind::AudioSummary, &audio), (BlockKind::Metadata, &meta)]
        )
        .is_err());
    }
}
