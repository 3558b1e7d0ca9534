use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use super::transcript::{parse_labels, parse_transcript, write_labels, write_transcript, MeetingMeta, TranscriptFormat};
use super::types::{DatasetSplit, LabeledMeeting};
use crate::error::{Error, Result};

const LABEL_SUFFIX: &str = ".labels.jsonl";

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).map_err(|e| Error::file(path, e))?))
}

/// Reads a corpus directory: `<id>.jsonl` transcripts, each with an
/// `<id>.labels.jsonl` label file. Meetings are returned sorted by id.
pub fn read_corpus_dir(dir: &Path) -> Result<Vec<LabeledMeeting>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::file(dir, e))?;
    let mut ids = Vec::new();
    for entry in entries {
        let name = entry.map_err(|e| Error::file(dir, e))?.file_name();
        let Some(name) = name.to_str() else { continue };
        if name.ends_with(LABEL_SUFFIX) {
            continue;
        }
        if let Some(id) = name.strip_suffix(".jsonl") {
            ids.push(id.to_owned());
        }
    }
    ids.sort();
    ids.into_iter()
        .map(|id| {
            let tpath = dir.join(format!("{id}.jsonl"));
            let meeting = parse_transcript(open(&tpath)?, TranscriptFormat::Jsonl, MeetingMeta::new(&id))
                .map_err(|e| Error::Validation(format!("{}: {e}", tpath.display())))?;
            let lpath = dir.join(format!("{id}{LABEL_SUFFIX}"));
            let labels = parse_labels(open(&lpath)?, &meeting)
                .map_err(|e| Error::Validation(format!("{}: {e}", lpath.display())))?;
            Ok(LabeledMeeting { meeting, labels })
        })
        .collect()
}

pub fn write_corpus_dir(dir: &Path, meetings: &[LabeledMeeting]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
    for m in meetings {
        let tpath = dir.join(format!("{}.jsonl", m.meeting.id));
        std::fs::write(&tpath, write_transcript(&m.meeting)?).map_err(|e| Error::file(&tpath, e))?;
        let lpath = dir.join(format!("{}{LABEL_SUFFIX}", m.meeting.id));
        std::fs::write(&lpath, write_labels(&m.meeting, &m.labels)?).map_err(|e| Error::file(&lpath, e))?;
    }
    Ok(())
}

/// Meetings of each split, in split order.
pub fn partition<'a>(
    meetings: &'a [LabeledMeeting],
    split: &DatasetSplit,
) -> [Vec<&'a LabeledMeeting>; 3] {
    let pick = |ids: &[String]| -> Vec<&'a LabeledMeeting> {
        ids.iter()
            .filter_map(|id| meetings.iter().find(|m| &m.meeting.id == id))
            .collect()
    };
    [pick(&split.train), pick(&split.validation), pick(&split.test)]
}
