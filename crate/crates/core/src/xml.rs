//! Small helpers shared by the XES and PNML readers.

use std::collections::HashMap;

use quick_xml::events::BytesStart;
use quick_xml::Reader;

/// 1-based line and column of byte offset `pos`.
pub(crate) fn line_col(source: &[u8], pos: usize) -> (usize, usize) {
    let upto = &source[..pos.min(source.len())];
    let line = upto.iter().filter(|b| **b == b'\n').count() + 1;
    let col_start = upto.iter().rposition(|b| *b == b'\n').map_or(0, |i| i + 1);
    let column = String::from_utf8_lossy(&upto[col_start..]).chars().count() + 1;
    (line, column)
}

pub(crate) fn error_position(reader: &Reader<&[u8]>, source: &[u8]) -> (usize, usize) {
    line_col(source, reader.error_position() as usize)
}

pub(crate) fn local_name(e: &BytesStart<'_>) -> String {
    String::from_utf8_lossy(e.local_name().as_ref()).into_owned()
}

/// Attributes of an element, unescaped. Malformed attributes are skipped.
pub(crate) fn attributes(e: &BytesStart<'_>) -> HashMap<String, String> {
    e.attributes()
        .flatten()
        .filter_map(|a| {
            let key = String::from_utf8_lossy(a.key.local_name().as_ref()).into_owned();
            let value = a.unescape_value().ok()?.into_owned();
            Some((key, value))
        })
        .collect()
}
