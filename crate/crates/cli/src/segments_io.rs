//! On-disk format for the `segment` -> `featurize` handoff: a window
//! directory of little-endian f32 files, an `index.csv` naming each
//! window with its provenance, and a `segment_meta.json` with the shared
//! parameters.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use cavdet::dataset::{write_signal, FlowState, Partition, SignalCodec};
use cavdet::nosw::Segment;
use cavdet::{Error, Result};

pub const INDEX_FILE: &str = "index.csv";
pub const META_FILE: &str = "segment_meta.json";
pub const WINDOW_DIR: &str = "windows";
const INDEX_HEADER: &str = "parent_id,window_index,partition,label,pressure,opening,path";

/// Parameters every window in a segment directory shares.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentMeta {
    pub window_size: usize,
    pub sample_rate: f64,
    pub codec: SignalCodec,
}

/// Write all segments under `dir`: sample files in `dir/windows/`, the
/// index and shared metadata beside them.
pub fn write_segments(dir: &Path, segments: &[Segment], meta: &SegmentMeta) -> Result<()> {
    let window_dir = dir.join(WINDOW_DIR);
    std::fs::create_dir_all(&window_dir).map_err(|e| Error::io(&window_dir, e))?;

    let mut index = String::from(INDEX_HEADER);
    index.push('\n');
    for segment in segments {
        let name = format!(
            "{}_{:05}.{}",
            segment.parent_id,
            segment.window_index,
            meta.codec.extension()
        );
        write_signal(&segment.samples, meta.codec, &window_dir.join(&name))?;
        index.push_str(&format!(
            "{},{},{},{},{},{},{}/{}\n",
            segment.parent_id,
            segment.window_index,
            segment.partition,
            segment.label,
            segment.upstream_pressure,
            segment.valve_opening,
            WINDOW_DIR,
            name
        ));
    }
    let index_path = dir.join(INDEX_FILE);
    std::fs::write(&index_path, index).map_err(|e| Error::io(&index_path, e))?;

    let meta_path = dir.join(META_FILE);
    let body = serde_json::to_string_pretty(meta)
        .map_err(|e| Error::Data(format!("could not serialize segment metadata: {e}")))?;
    std::fs::write(&meta_path, body).map_err(|e| Error::io(&meta_path, e))
}

fn decode_window(path: &Path, codec: SignalCodec) -> Result<Vec<f64>> {
    match codec {
        SignalCodec::F32le => {
            let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
            if bytes.len() % 4 != 0 {
                return Err(Error::parse(
                    path,
                    format!("{} bytes is not a whole number of f32 samples", bytes.len()),
                ));
            }
            Ok(bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                .collect())
        }
        SignalCodec::Csv => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            text.lines()
                .enumerate()
                .map(|(i, line)| {
                    line.trim().parse::<f64>().map_err(|e| {
                        Error::parse(path, format!("line {}: {e}", i + 1))
                    })
                })
                .collect()
        }
    }
}

/// Load a segment directory back into memory.
pub fn read_segments(dir: &Path) -> Result<(Vec<Segment>, SegmentMeta)> {
    let meta_path = dir.join(META_FILE);
    let meta_text = std::fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: SegmentMeta = serde_json::from_str(&meta_text)
        .map_err(|e| Error::parse(&meta_path, e.to_string()))?;
    if meta.window_size == 0 {
        return Err(Error::parse(&meta_path, "window_size must be positive"));
    }

    let index_path = dir.join(INDEX_FILE);
    let text = std::fs::read_to_string(&index_path).map_err(|e| Error::io(&index_path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == INDEX_HEADER => {}
        Some((_, header)) => {
            return Err(Error::parse(
                &index_path,
                format!("unexpected header {header:?}"),
            ))
        }
        None => return Err(Error::parse(&index_path, "index is empty")),
    }

    let mut segments = Vec::new();
    for (line_no, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(Error::parse(
                &index_path,
                format!("line {}: expected 7 fields, got {}", line_no + 1, fields.len()),
            ));
        }
        let bad = |what: &str, detail: String| {
            Error::parse(&index_path, format!("line {}: bad {what}: {detail}", line_no + 1))
        };
        let window_index: usize = fields[1]
            .parse()
            .map_err(|e| bad("window_index", format!("{e}")))?;
        let partition = Partition::parse(fields[2])
            .map_err(|e| bad("partition", e.to_string()))?;
        let label = FlowState::parse(fields[3]).map_err(|e| bad("label", e.to_string()))?;
        let pressure: f64 = fields[4].parse().map_err(|e| bad("pressure", format!("{e}")))?;
        let opening: f64 = fields[5].parse().map_err(|e| bad("opening", format!("{e}")))?;

        let window_path: PathBuf = dir.join(fields[6]);
        let samples = decode_window(&window_path, meta.codec)?;
        if samples.len() != meta.window_size {
            return Err(Error::Data(format!(
                "window {} holds {} samples, expected {}",
                window_path.display(),
                samples.len(),
                meta.window_size
            )));
        }
        segments.push(Segment {
            parent_id: fields[0].to_string(),
            window_index,
            samples,
            sample_rate: meta.sample_rate,
            upstream_pressure: pressure,
            valve_opening: opening,
            label,
            partition,
        });
    }
    if segments.is_empty() {
        return Err(Error::Data(format!(
            "segment index {} lists no windows",
            index_path.display()
        )));
    }
    Ok((segments, meta))
}
