use alloc::string::String;
use alloc::vec::Vec;

use super::TextRecord;
use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// One raw document before chunking.
#[derive(Debug, Clone, Copy)]
pub struct RawText<'a> {
    pub id: &'a str,
    pub category: &'a str,
    pub bytes: &'a [u8],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chunk {
    pub record: TextRecord,
    pub payload: String,
}

/// Consecutive pieces of at most `chunk_bytes` bytes. A piece whose end
/// would split a codepoint loses trailing bytes one at a time until it ends
/// on a boundary; the lost bytes open the next piece.
///
/// `chunk_bytes` must be at least 4 so every piece makes progress.
pub fn split_chunks(text: &str, chunk_bytes: usize) -> Vec<&str> {
    assert!(chunk_bytes >= 4, "chunk_bytes must fit any codepoint");
    let mut out = Vec::new();
    let mut start = 0;
    while start < text.len() {
        let mut end = (start + chunk_bytes).min(text.len());
        while !text.is_char_boundary(end) {
            end -= 1;
        }
        out.push(&text[start..end]);
        start = end;
    }
    out
}

/// Split every text into byte-bounded chunks and drop the short ones.
///
/// Chunk IDs are `<text id>:<chunk index>`, where the index counts all
/// chunks of the text including discarded ones.
pub fn chunk_corpus<'a>(
    raw_texts: impl IntoIterator<Item = RawText<'a>>,
    chunk_bytes: usize,
    min_bytes: usize,
) -> Result<Vec<Chunk>> {
    if min_bytes == 0 || chunk_bytes <= min_bytes {
        return Err(Error::range(
            "chunk sizes",
            alloc::format!("need chunk_bytes > min_bytes > 0, got {chunk_bytes} and {min_bytes}"),
        ));
    }
    if chunk_bytes < 4 {
        return Err(Error::range("chunk_bytes", "must be at least 4"));
    }
    let mut out = Vec::new();
    for (index, raw) in raw_texts.into_iter().enumerate() {
        let text = core::str::from_utf8(raw.bytes).map_err(|e| Error::InvalidUtf8 {
            text: index,
            offset: e.valid_up_to(),
        })?;
        for (k, piece) in split_chunks(text, chunk_bytes).into_iter().enumerate() {
            if piece.len() < min_bytes {
                continue;
            }
            out.push(Chunk {
                record: TextRecord::new(alloc::format!("{}:{k}", raw.id), raw.category, piece.len()),
                payload: piece.into(),
            });
        }
    }
    Ok(out)
}

/// `n` records drawn uniformly without replacement, in their original order.
///
/// Algorithm: indices `0..len` are shuffled with a front-to-back
/// Fisher–Yates pass driven by [`SplitMix64`] seeded with `seed`, the first
/// `n` shuffled indices are kept, and they are sorted ascending.
pub fn sample_texts(records: &[TextRecord], n: usize, seed: u64) -> Result<Vec<TextRecord>> {
    if n > records.len() {
        return Err(Error::range(
            "sample size",
            alloc::format!("asked for {n} of {} records", records.len()),
        ));
    }
    let mut idx: Vec<usize> = (0..records.len()).collect();
    SplitMix64::new(seed).shuffle(&mut idx);
    let mut keep = idx[..n].to_vec();
    keep.sort_unstable();
    Ok(keep.into_iter().map(|i| records[i].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn raw<'a>(bytes: &'a [u8]) -> RawText<'a> {
        RawText {
            id: "doc",
            category: "Pile-CC",
            bytes,
        }
    }

    #[test]
    fn exact_division() {
        let text = vec![b'a'; 2048];
        let chunks = chunk_corpus([raw(&text)], 1024, 256).unwrap();
        assert_eq!(chunks.len(), 2);
        assert!(chunks.iter().all(|c| c.record.byte_length == 1024));
        assert_eq!(chunks[1].record.text_id, "doc:1");
    }

    #[test]
    fn short_texts_are_dropped() {
        let text = vec![b'a'; 200];
        assert!(chunk_corpus([raw(&text)], 1024, 256).unwrap().is_empty());
    }

    #[test]
    fn boundary_inside_codepoint_backs_off() {
        // 1023 ASCII bytes then U+20AC (3 bytes: E2 82 AC). The 1024-byte cut
        // lands after E2, so the chunk shrinks to 1023 and the euro sign
        // opens the next chunk.
        let mut s = String::from_utf8(vec![b'x'; 1023]).unwrap();
        s.push('€');
        let pieces = split_chunks(&s, 1024);
        assert_eq!(pieces.len(), 2);
        assert_eq!(pieces[0].len(), 1023);
        assert_eq!(pieces[1], "€");
    }

    #[test]
    fn invalid_utf8_is_rejected() {
        let bad = [b'a', 0xFF, b'b'];
        let err = chunk_corpus([raw(b"fine"), raw(&bad)], 1024, 1).unwrap_err();
        assert_eq!(err, Error::InvalidUtf8 { text: 1, offset: 1 });
    }

    #[test]
    fn bad_sizes() {
        assert!(chunk_corpus([raw(b"abc")], 256, 256).is_err());
        assert!(chunk_corpus([raw(b"abc")], 10, 0).is_err());
    }

    fn records(n: usize) -> Vec<TextRecord> {
        (0..n)
            .map(|i| TextRecord::new(alloc::format!("t{i}"), "c", 1 + i))
            .collect()
    }

    #[test]
    fn sample_everything_and_too_many() {
        let r = records(12);
        assert_eq!(sample_texts(&r, 12, 5).unwrap(), r);
        assert!(sample_texts(&r, 13, 5).is_err());
    }

    #[test]
    fn sample_is_deterministic_and_ordered() {
        let r = records(1000);
        let a = sample_texts(&r, 10, 99).unwrap();
        let b = sample_texts(&r, 10, 99).unwrap();
        assert_eq!(a, b);
        let pos: Vec<usize> = a.iter().map(|t| t.byte_length - 1).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
        assert_ne!(a, sample_texts(&r, 10, 100).unwrap());
    }

    proptest! {
        #[test]
        fn chunks_concatenate_and_decode(s in "\\PC{0,400}", size in 4usize..64) {
            let pieces = split_chunks(&s, size);
            let joined: String = pieces.concat();
            prop_assert_eq!(&joined, &s);
            for p in &pieces {
                prop_assert!(p.len() <= size);
                prop_assert!(!p.is_empty());
                prop_assert!(core::str::from_utf8(p.as_bytes()).is_ok());
            }
        }
    }
}
