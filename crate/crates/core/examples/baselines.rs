//! Load pretrained tokenizers from their native files: a GPT-2 style
//! `vocab.json` + `merges.txt`, a base64 rank file, and a Unigram TSV.
//! The files are written to a temporary directory first.

use std::fs;

use base64::Engine;
use subtok::baselines::{load_rank_file, load_unigram_tsv, load_vocab_merges, PretrainedEncoder};
use subtok::bytes::byte_to_char;
use subtok::corpus::PretokenPolicy;
use subtok::tokens::Tokenizer;

fn main() -> subtok::Result<()> {
    let dir = std::env::temp_dir().join(format!("subtok-baselines-{}", std::process::id()));
    fs::create_dir_all(&dir).expect("temp dir");

    let mut pieces: Vec<String> = (0..=255u8).map(|b| byte_to_char(b).to_string()).collect();
    pieces.extend(["lo", "low", "Ġlow", "er"].map(String::from));
    let vocab: serde_json::Map<String, serde_json::Value> = pieces
        .iter()
        .enumerate()
        .map(|(i, p)| (p.clone(), i.into()))
        .collect();
    fs::write(
        dir.join("vocab.json"),
        serde_json::to_string(&vocab).unwrap(),
    )
    .unwrap();
    fs::write(
        dir.join("merges.txt"),
        "#version: 0.2\nl o\nlo w\nĠ low\ne r\n",
    )
    .unwrap();

    let b64 = base64::engine::general_purpose::STANDARD;
    let ranks: String = (0..=255u8)
        .map(|b| vec![b])
        .chain([b"lo".to_vec(), b"low".to_vec(), b" low".to_vec()])
        .enumerate()
        .map(|(rank, bytes)| format!("{} {rank}\n", b64.encode(bytes)))
        .collect();
    fs::write(dir.join("tiny.tiktoken"), ranks).unwrap();

    let tsv =
        "#! unigram v1\n#! unk\t<unk>\nl\t-3\no\t-3\nw\t-3\ne\t-3\nr\t-3\nlow\t-1\ner\t-1.5\n";
    fs::write(dir.join("tiny.tsv"), tsv).unwrap();

    let encoders: Vec<(&str, PretrainedEncoder)> = vec![
        (
            "vocab+merges",
            load_vocab_merges(&dir.join("vocab.json"), &dir.join("merges.txt"))?,
        ),
        ("rank file", load_rank_file(&dir.join("tiny.tiktoken"))?),
        ("unigram tsv", load_unigram_tsv(&dir.join("tiny.tsv"))?),
        ("pure bytes", PretrainedEncoder::pure_bytes()),
    ];
    let text = "low lower";
    for (name, enc) in &encoders {
        let policy = if enc.is_byte_level() {
            PretokenPolicy::byte_level()
        } else {
            PretokenPolicy::whitespace()
        };
        let seq = enc.encode(text, &policy)?;
        println!(
            "{name:>13}: {} tokens {:?} -> {:?}",
            seq.len(),
            seq.ids,
            enc.decode(&seq.ids)?
        );
    }
    fs::remove_dir_all(&dir).ok();
    Ok(())
}
