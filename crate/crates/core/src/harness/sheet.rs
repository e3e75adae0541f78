use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::harmonize::CandidateSet;
use crate::imagecore::{save_image, ImageGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SheetEntry {
    pub depth: usize,
    pub score: f64,
    pub row: usize,
    pub col: usize,
    pub selected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SheetSidecar {
    pub rows: usize,
    pub cols: usize,
    pub tile_width: usize,
    pub tile_height: usize,
    pub entries: Vec<SheetEntry>,
}

/// `(rows, cols)` of the smallest near-square grid holding `n` tiles.
pub fn sheet_layout(n: usize) -> (usize, usize) {
    if n == 0 {
        return (0, 0);
    }
    let mut cols = (n as f64).sqrt().ceil() as usize;
    while cols * cols < n {
        cols += 1;
    }
    while (cols - 1) * (cols - 1) >= n {
        cols -= 1;
    }
    (n.div_ceil(cols), cols)
}

fn sidecar_path(out_path: &Path) -> PathBuf {
    out_path.with_extension("json")
}

/// Tiles the candidates in depth order into one image and writes a JSON
/// sidecar next to it with each tile's depth, score and the selected flag.
pub fn contact_sheet(cands: &CandidateSet, out_path: impl AsRef<Path>) -> Result<SheetSidecar> {
    let out_path = out_path.as_ref();
    ensure!(!cands.candidates.is_empty(), "contact sheet needs at least one candidate");
    let mut order: Vec<usize> = (0..cands.candidates.len()).collect();
    order.sort_by_key(|&i| cands.candidates[i].depth);
    let first = &cands.candidates[order[0]].image;
    let (tw, th, ch) = (first.width(), first.height(), first.channels());
    for c in &cands.candidates {
        ensure!(
            c.image.width() == tw && c.image.height() == th && c.image.channels() == ch,
            "candidate images differ in size"
        );
    }
    let selected_depth = cands.select_best()?.depth;
    let (rows, cols) = sheet_layout(order.len());
    let mut sheet = ImageGrid::filled(cols * tw, rows * th, ch, 0.0)?;
    let mut entries = Vec::with_capacity(order.len());
    for (k, &i) in order.iter().enumerate() {
        let cand = &cands.candidates[i];
        let (row, col) = (k / cols, k % cols);
        for c in 0..ch {
            for y in 0..th {
                for x in 0..tw {
                    sheet.set(col * tw + x, row * th + y, c, cand.image.get(x, y, c));
                }
            }
        }
        entries.push(SheetEntry {
            depth: cand.depth,
            score: cand.score,
            row,
            col,
            selected: cand.depth == selected_depth,
        });
    }
    save_image(&sheet, out_path)?;
    let sidecar = SheetSidecar {
        rows,
        cols,
        tile_width: tw,
        tile_height: th,
        entries,
    };
    let side = sidecar_path(out_path);
    let text = serde_json::to_string_pretty(&sidecar).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(&side, text).map_err(|e| Error::io(side, e))?;
    Ok(sidecar)
}
