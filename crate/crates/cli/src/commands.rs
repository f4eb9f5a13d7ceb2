use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use circwords::coeff::CoefficientSystem;
use circwords::functor::{transfer_measure, Direction, FunctorPair};
use circwords::matching::{improve_match, shift_spectrum, MatchIndex, MatchProblem};
use circwords::natural_map::{align_count, slippage, transfer_joining, PairedWord};
use circwords::report::Q;
use circwords::statistics::empdist;
use circwords::words::{
    format_word, parse, parse_anchored, parse_word, principal_blocks, ConstructionSequence, Kind, SampleWindow,
    SequenceDoc,
};
use num_bigint::{BigInt, BigUint};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

use crate::error::CliError;
use crate::{Command, DirectionArg, DocArgs, KindArg};

type Report = Map<String, Value>;

fn report(schema: &str, body: Value) -> Report {
    let mut m = Map::new();
    m.insert("schema".into(), format!("circwords.{schema}/1").into());
    if let Value::Object(b) = body {
        m.extend(b);
    }
    m
}

fn to_json<T: serde::Serialize>(v: &T) -> Result<Value, CliError> {
    Ok(serde_json::to_value(v)?)
}

/// Exact integers: plain JSON numbers while they fit, strings beyond that.
fn int(v: impl Into<BigInt>) -> Value {
    let v: BigInt = v.into();
    match i64::try_from(&v) {
        Ok(x) => x.into(),
        Err(_) => v.to_string().into(),
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Read { path: path.display().to_string(), source })
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path, text: &str) -> Result<T, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Document { path: path.display().to_string(), message: e.to_string() })
}

fn load(args: &DocArgs) -> Result<Arc<ConstructionSequence>, CliError> {
    let doc: SequenceDoc = parse_json(&args.doc, &read(&args.doc)?)?;
    let kind = match args.kind {
        Some(KindArg::Circular) => Kind::Circular,
        Some(KindArg::Odometer) => Kind::Odometer,
        None => doc.kind.unwrap_or(Kind::Circular),
    };
    let seq = ConstructionSequence::from_doc(&doc, kind)
        .map_err(|e| CliError::Document { path: args.doc.display().to_string(), message: e.to_string() })?;
    Ok(Arc::new(seq))
}

fn word_text(seq: &ConstructionSequence, n: usize, idx: usize) -> Value {
    if seq.is_materializable(n) {
        seq.word(n, idx).map(|w| format_word(&w).into()).unwrap_or(Value::Null)
    } else {
        Value::Null
    }
}

pub fn run(command: Command, seed: u64) -> Result<Report, CliError> {
    match command {
        Command::Derive { k, l, levels } => derive(&k, &l, levels),
        Command::Build { doc, level, index } => build(&doc, level, index),
        Command::SymbolAt { doc, level, index, pos, random } => symbol_at(&doc, level, index, &pos, random, seed),
        Command::Parse { doc, word, level, start, anchor, principal } => {
            parse_cmd(&doc, &word, level, start, anchor, principal)
        }
        Command::Empdist { doc, level, index, sub } => empdist_cmd(&doc, level, index, sub),
        Command::Align { doc, sub, word, other } => {
            let seq = load(&doc)?;
            let r = align_count(&seq, word, other, sub)?;
            Ok(report("align", to_json(&r)?))
        }
        Command::Slippage { doc, from, to, u, v } => {
            let seq = load(&doc)?.with_kind(Kind::Circular);
            let seq = Arc::new(seq);
            let pair = PairedWord::new(&seq, u, &seq, v, to)?;
            let r = slippage(&pair, from)?;
            let mut out = report("slippage", json!({ "u": u, "v": v }));
            out.insert("exact".into(), r.product_law.into());
            if let Value::Object(m) = to_json(&r)? {
                out.extend(m);
            }
            Ok(out)
        }
        Command::Transfer { doc, level, horizon, direction, table, table_file, joining } => {
            transfer(&doc, level, horizon, direction, table, table_file.as_deref(), joining)
        }
        Command::Match { doc, problem, k } => match_cmd(&doc, &problem, k),
    }
}

fn derive(k: &[u64], l: &[u64], levels: usize) -> Result<Report, CliError> {
    if levels == 0 {
        return Err(CliError::Usage("--levels must be at least 1".into()));
    }
    let cs = CoefficientSystem::derive(k, l, levels - 1)?;
    let mut rows = Vec::new();
    for n in 0..levels {
        rows.push(json!({
            "n": n,
            "q": int(cs.q(n).clone()),
            "p": int(cs.p(n).clone()),
            "p_inv": int(cs.p_inv(n).clone()),
            "K": int(cs.odometer_len(n).clone()),
            "A": int(cs.a_shift(n)?.clone()),
        }));
    }
    Ok(report("derive", json!({ "k": k, "l": l, "levels": levels, "rows": rows })))
}

fn build(args: &DocArgs, level: usize, index: Option<usize>) -> Result<Report, CliError> {
    let seq = load(args)?;
    if level > seq.top() {
        return Err(circwords::Error::LevelOutOfRange { level, max: seq.top() }.into());
    }
    let count = seq.count(level);
    let chosen: Vec<usize> = match index {
        Some(i) if i >= count => {
            return Err(circwords::Error::IndexOutOfRange { index: format!("--index {i}"), limit: count.to_string() }.into())
        }
        Some(i) => vec![i],
        None => (0..count).collect(),
    };
    let rows: Vec<Value> = chosen
        .into_iter()
        .map(|i| json!({ "index": i, "length": int(seq.word_len(level).clone()), "word": word_text(&seq, level, i) }))
        .collect();
    let doc = to_json(&seq.to_doc())?;
    let mut out = report("build", doc);
    out.insert("level".into(), level.into());
    out.insert("rows".into(), rows.into());
    Ok(out)
}

fn symbol_at(
    args: &DocArgs,
    level: usize,
    index: usize,
    pos: &[String],
    random: usize,
    seed: u64,
) -> Result<Report, CliError> {
    use num_bigint::RandBigInt;
    let seq = load(args)?;
    if level > seq.top() {
        return Err(circwords::Error::LevelOutOfRange { level, max: seq.top() }.into());
    }
    let len = seq.word_len(level).clone();
    let mut positions = Vec::new();
    for (i, p) in pos.iter().enumerate() {
        let v: BigUint = p
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("--pos entry {i} ({p:?}) is not a nonnegative integer")))?;
        positions.push(v);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..random {
        positions.push(rng.gen_biguint_below(&len));
    }
    let materialized = if seq.is_materializable(level) { Some(seq.word(level, index)?) } else { None };
    let mut rows = Vec::new();
    let mut agree = true;
    for p in &positions {
        let s = seq.symbol_at(level, index, p)?;
        if let Some(w) = &materialized {
            let i: usize = p.try_into().expect("below a materializable length");
            agree &= w[i] == s;
        }
        rows.push(json!({ "pos": int(p.clone()), "symbol": format_word(&[s]) }));
    }
    let checked = materialized.as_ref().map(|_| agree);
    Ok(report(
        "symbol_at",
        json!({ "level": level, "index": index, "length": int(len), "seed": seed, "matches_content": checked, "rows": rows }),
    ))
}

fn parse_cmd(
    args: &DocArgs,
    word: &str,
    level: usize,
    start: i64,
    anchor: Option<i64>,
    principal: Option<usize>,
) -> Result<Report, CliError> {
    let seq = load(args)?;
    let window = SampleWindow::new(start, parse_word(word)?)?;
    let parsed = match (seq.kind(), anchor) {
        (Kind::Odometer, Some(a)) => parse_anchored(&window, &seq, level, a)?,
        (Kind::Odometer, None) => return Err(CliError::Usage("odometer windows need --anchor".into())),
        (Kind::Circular, _) => parse(&window, &seq, level)?,
    };
    let rows: Vec<Value> = parsed.occurrences.iter().map(|o| json!({ "pos": o.pos, "index": o.index })).collect();
    let mut out = report(
        "parse",
        json!({ "level": level, "start": start, "length": window.symbols.len(), "uncovered": parsed.uncovered, "rows": rows }),
    );
    if let Some(top) = principal {
        if seq.kind() != Kind::Circular {
            return Err(CliError::Usage("--principal needs a circular sequence".into()));
        }
        let data = principal_blocks(&window, &seq, top)?;
        if let Some(n) = data.levels.iter().position(Option::is_none) {
            return Err(circwords::Error::Undecidable(format!("principal {n}-block of the origin is not inside the window")).into());
        }
        out.insert("principal".into(), to_json(&data.levels)?);
    }
    Ok(out)
}

fn empdist_cmd(args: &DocArgs, level: usize, index: usize, sub: usize) -> Result<Report, CliError> {
    let seq = load(args)?;
    let d = empdist(&seq, level, index, sub)?;
    let rows: Vec<Value> = d
        .masses
        .iter()
        .map(|(key, mass)| {
            let i = key[0];
            json!({ "index": i, "word": word_text(&seq, sub, i), "mass": Q(mass.clone()).to_string() })
        })
        .collect();
    Ok(report(
        "empdist",
        json!({ "level": level, "index": index, "sub_level": sub, "total": Q(d.total()).to_string(), "rows": rows }),
    ))
}

type Table = BTreeMap<(usize, usize), Q>;

/// Parse `0=1/2,1=1/2` or `0:1=1/4,...` into keyed weights; single keys use `(k, 0)`.
fn inline_table(text: &str, joining: bool) -> Result<Table, CliError> {
    let mut out = BTreeMap::new();
    for (i, entry) in text.split(',').map(str::trim).filter(|e| !e.is_empty()).enumerate() {
        let bad = || CliError::Usage(format!("--table entry {i} ({entry:?}) is malformed"));
        let (key, w) = entry.split_once('=').ok_or_else(bad)?;
        let key = if joining {
            let (u, v) = key.split_once(':').ok_or_else(bad)?;
            (u.trim().parse().map_err(|_| bad())?, v.trim().parse().map_err(|_| bad())?)
        } else {
            (key.trim().parse().map_err(|_| bad())?, 0)
        };
        let w: Q = w.parse().map_err(|_| bad())?;
        if out.insert(key, w).is_some() {
            return Err(CliError::Usage(format!("--table entry {i} repeats a key")));
        }
    }
    Ok(out)
}

/// Read the rows of an earlier transfer report.
fn file_table(path: &Path, joining: bool) -> Result<Table, CliError> {
    let v: Value = parse_json(path, &read(path)?)?;
    let bad = |i: usize, what: &str| CliError::Document { path: path.display().to_string(), message: format!("rows[{i}]: {what}") };
    let rows = v.get("rows").and_then(Value::as_array).ok_or_else(|| CliError::Document {
        path: path.display().to_string(),
        message: "missing rows".into(),
    })?;
    let mut out = BTreeMap::new();
    for (i, row) in rows.iter().enumerate() {
        let field = |name: &str| row.get(name).and_then(Value::as_u64).map(|x| x as usize).ok_or_else(|| bad(i, name));
        let key = if joining { (field("u")?, field("v")?) } else { (field("word")?, 0) };
        let w: Q = row.get("weight").and_then(Value::as_str).ok_or_else(|| bad(i, "weight"))?.parse().map_err(|e: String| bad(i, &e))?;
        out.insert(key, w);
    }
    Ok(out)
}

fn transfer(
    args: &DocArgs,
    level: usize,
    horizon: usize,
    direction: DirectionArg,
    table: Option<String>,
    table_file: Option<&Path>,
    joining: bool,
) -> Result<Report, CliError> {
    let seq = Arc::new(load(args)?.with_kind(Kind::Circular));
    let input = match (table, table_file) {
        (Some(t), _) => inline_table(&t, joining)?,
        (None, Some(p)) => file_table(p, joining)?,
        (None, None) => return Err(CliError::Usage("one of --table or --table-file is required".into())),
    };
    let dir = match direction {
        DirectionArg::Up => Direction::Up,
        DirectionArg::Down => Direction::Down,
    };
    let flipped = match direction {
        DirectionArg::Up => "down",
        DirectionArg::Down => "up",
    };
    let (factor, rows): (Q, Vec<Value>) = if joining {
        let t = input.into_iter().map(|(k, v)| (k, v.0)).collect();
        let r = transfer_joining(&seq, level, horizon, &t, dir)?;
        let rows = r.table.into_iter().map(|((u, v), w)| json!({ "u": u, "v": v, "weight": Q(w).to_string() })).collect();
        (Q(r.factor), rows)
    } else {
        let pair = FunctorPair::drop(&seq, false)?;
        let t = input.into_iter().map(|((k, _), v)| (k, v.0)).collect();
        let r = transfer_measure(&pair, level, horizon, &t, dir)?;
        let rows = r.table.into_iter().map(|(k, w)| json!({ "word": k, "weight": Q(w).to_string() })).collect();
        (Q(r.factor), rows)
    };
    Ok(report(
        "transfer",
        json!({
            "level": level,
            "horizon": horizon,
            "joining": joining,
            "direction": match direction { DirectionArg::Up => "up", DirectionArg::Down => "down" },
            "inverse_direction": flipped,
            "factor": factor.to_string(),
            "rows": rows,
        }),
    ))
}

fn match_cmd(args: &DocArgs, path: &Path, k: Option<i64>) -> Result<Report, CliError> {
    let seq = load(args)?;
    let mut problem: MatchProblem = parse_json(path, &read(path)?)?;
    if let Some(k) = k {
        problem.k = k;
    }
    let index = MatchIndex::new(&seq, &problem)?;
    let improvement = improve_match(&seq, &problem)?;
    let rows: Vec<Value> = (0..problem.pairs.len())
        .map(|p| {
            let v = index.is_perfect(p, problem.k);
            json!({
                "pair": p,
                "u": problem.pairs[p].0,
                "v": problem.pairs[p].1,
                "matches": v.matches,
                "perfect": v.perfect,
                "reason": v.reason,
            })
        })
        .collect();
    let spectrum = shift_spectrum(&seq, problem.sub_level, problem.level)?;
    Ok(report(
        "match",
        json!({
            "problem": to_json(&problem)?,
            "k": problem.k,
            "k_prime": improvement.k_prime,
            "postconditions_hold": improvement.holds(),
            "improvement": to_json(&improvement)?,
            "spectrum": to_json(&spectrum)?,
            "rows": rows,
        }),
    ))
}
