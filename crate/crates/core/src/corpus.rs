//! The four source texts used to start chains.
//!
//! `t1`/`t3` are the Portuguese/English versions of one short passage;
//! `t2` (Portuguese) and `t4` (English) are longer excerpts from two
//! editions of the same book.

use crate::chain::SourceText;

pub const BUNDLED_IDS: [&str; 4] = ["t1", "t2", "t3", "t4"];

const T1: &str = include_str!("../data/texts/t1.txt");
const T2: &str = include_str!("../data/texts/t2.txt");
const T3: &str = include_str!("../data/texts/t3.txt");
const T4: &str = include_str!("../data/texts/t4.txt");

pub fn bundled_text(id: &str) -> Option<SourceText> {
    let (language, body) = match id {
        "t1" => ("pt", T1),
        "t2" => ("pt", T2),
        "t3" => ("en", T3),
        "t4" => ("en", T4),
        _ => return None,
    };
    Some(SourceText::new(id, language, body.trim_end()))
}

/// The English text a bundled Portuguese text is a translation of.
pub fn english_counterpart(id: &str) -> Option<&'static str> {
    match id {
        "t1" => Some("t3"),
        _ => None,
    }
}
