//! Layer curves as CSV.
//!
//! ```text
//! layer_id,col,row
//! # width=4
//! 2,0,10
//! 2,1,11
//! 3,0,17
//! ```
//!
//! One line per defined `(layer, column)`, sorted by layer then column;
//! columns without a row are omitted. A layer with no rows at all cannot be
//! represented and is dropped on write.

use std::fmt::Write as _;
use std::path::Path;

use layerkit_core::{LayerId, LayerMap};

use super::{read_text, write_atomic, Error, Result};

pub const HEADER: &str = "layer_id,col,row";

pub fn encode(m: &LayerMap) -> String {
    let mut out = format!("{HEADER}\n# width={}\n", m.width());
    for (id, rows) in m.iter() {
        for (col, row) in rows.iter().enumerate() {
            if let Some(row) = row {
                let _ = writeln!(out, "{id},{col},{row}");
            }
        }
    }
    out
}

fn err(line: usize, message: impl Into<String>) -> Error {
    Error::LayersCsv {
        line,
        message: message.into(),
    }
}

pub fn decode(text: &str) -> Result<LayerMap> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, l)) if l.trim_end() == HEADER => {}
        _ => return Err(err(1, format!("expected header `{HEADER}`"))),
    }
    let width = match lines.next() {
        Some((n, l)) => l
            .trim_end()
            .strip_prefix("# width=")
            .and_then(|w| w.parse::<usize>().ok())
            .filter(|&w| w > 0)
            .ok_or_else(|| err(n, "expected `# width=N` with N > 0"))?,
        None => return Err(err(2, "missing `# width=N` line")),
    };

    let mut map = LayerMap::new(width)?;
    let mut current: Option<(LayerId, Vec<Option<u32>>)> = None;
    let mut last: Option<(LayerId, usize)> = None;
    for (n, line) in lines {
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(err(n, format!("expected 3 fields, found {}", fields.len())));
        }
        let id: LayerId = fields[0]
            .parse()
            .ok()
            .filter(|&id| id > 0)
            .ok_or_else(|| err(n, format!("invalid layer id `{}`", fields[0])))?;
        let col: usize = fields[1]
            .parse()
            .map_err(|_| err(n, format!("invalid column `{}`", fields[1])))?;
        let row: u32 = fields[2]
            .parse()
            .map_err(|_| err(n, format!("invalid row `{}`", fields[2])))?;
        if col >= width {
            return Err(err(
                n,
                format!("column {col} out of bounds for width {width}"),
            ));
        }
        if let Some(prev) = last {
            if (id, col) == prev {
                return Err(err(
                    n,
                    format!("duplicate entry for layer {id} column {col}"),
                ));
            }
            if (id, col) < prev {
                return Err(err(n, "rows are not sorted by (layer_id, col)"));
            }
        }
        last = Some((id, col));

        if current.as_ref().is_some_and(|(cur, _)| *cur != id) {
            let (cur, rows) = current.take().unwrap_or_default();
            map.insert(cur, rows)?;
        }
        current.get_or_insert_with(|| (id, vec![None; width])).1[col] = Some(row);
    }
    if let Some((id, rows)) = current {
        map.insert(id, rows)?;
    }
    Ok(map)
}

pub fn read(path: &Path) -> Result<LayerMap> {
    decode(&read_text(path)?)
}

pub fn write(path: &Path, m: &LayerMap) -> Result<()> {
    write_atomic(path, encode(m).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_map() {
        let m = LayerMap::new(7).unwrap();
        assert_eq!(encode(&m), "layer_id,col,row\n# width=7\n");
        assert_eq!(decode(&encode(&m)).unwrap(), m);
    }

    #[test]
    fn sparse_layers() {
        let mut m = LayerMap::new(3).unwrap();
        m.insert(2, vec![Some(4), None, Some(5)]).unwrap();
        m.insert_complete(12, &[9, 9, 9]).unwrap();
        let text = encode(&m);
        assert_eq!(
            text,
            "layer_id,col,row\n# width=3\n2,0,4\n2,2,5\n12,0,9\n12,1,9\n12,2,9\n"
        );
        assert_eq!(decode(&text).unwrap(), m);
    }

    #[test]
    fn rejects_bad_input() {
        let h = "layer_id,col,row\n# width=3\n";
        let line_of = |text: &str| match decode(text) {
            Err(Error::LayersCsv { line, .. }) => line,
            other => panic!("expected error, got {other:?}"),
        };
        assert_eq!(line_of("id,col,row\n# width=3\n"), 1);
        assert_eq!(line_of("layer_id,col,row\n3\n"), 2);
        assert_eq!(line_of(&format!("{h}1,0,4\n1,0,5\n")), 4);
        assert_eq!(line_of(&format!("{h}2,0,4\n1,0,5\n")), 4);
        assert_eq!(line_of(&format!("{h}1,1,4\n1,0,5\n")), 4);
        assert_eq!(line_of(&format!("{h}1,3,4\n")), 3);
        assert_eq!(line_of(&format!("{h}0,0,4\n")), 3);
        assert_eq!(line_of(&format!("{h}1,0,-4\n")), 3);
        assert_eq!(line_of(&format!("{h}1,0\n")), 3);
    }

    prop_compose! {
        fn any_map()(width in 1usize..20)
            (layers in proptest::collection::btree_map(
                1u8..=255,
                proptest::collection::vec(proptest::option::of(0u32..100_000), width),
                0..8),
             width in Just(width)) -> LayerMap {
            let mut m = LayerMap::new(width).unwrap();
            for (id, mut rows) in layers {
                if rows.iter().all(Option::is_none) { rows[0] = Some(0); }
                m.insert(id, rows).unwrap();
            }
            m
        }
    }

    proptest! {
        #[test]
        fn round_trip(m in any_map()) {
            let text = encode(&m);
            prop_assert_eq!(decode(&text).unwrap(), m.clone());
            prop_assert_eq!(encode(&decode(&text).unwrap()), text);
        }
    }
}
