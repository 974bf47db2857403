//! Line-oriented dataset files.
//!
//! ```text
//! milbags v1 classes=4 dim=2 rule=four-class train=1 val=0 test=1
//! center 0 0,0
//! center 1 7,0
//! bag 0 1 2
//! 7.1,0.3,1
//! 0.2,-0.4,0
//! bag 1 0 1
//! 0.5,0.5,-
//! ```
//!
//! The header is the first line. `center` lines (optional) give the generating
//! cluster means keyed by tag. Each bag record is `bag <id> <label> <k>`
//! followed by exactly `k` rows of `d` comma-separated floats, optionally
//! followed by a tag field: `0` for a neutral instance, `c >= 1` for a key
//! instance of concept `c`, `-` for unlabeled. Either every row of a bag carries
//! a tag or none does. Bags are listed train first, then val, then test.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Center, ClassRule, Dataset};
use crate::bag::{Bag, InstanceTag};
use crate::error::{Error, Result};

const MAGIC: &str = "milbags";
const VERSION: &str = "v1";

pub fn save_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_dataset(dataset, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    read_dataset(BufReader::new(File::open(path)?))
}

pub fn write_dataset<W: Write>(dataset: &Dataset, mut w: W) -> Result<()> {
    let [train, val, test] = dataset.split_sizes();
    writeln!(
        w,
        "{MAGIC} {VERSION} classes={} dim={} rule={} train={train} val={val} test={test}",
        dataset.num_classes(),
        dataset.dim(),
        dataset.rule().name()
    )?;
    for center in dataset.centers() {
        writeln!(w, "center {} {}", tag_token(center.tag), join(&center.mean))?;
    }
    for (bag, id) in dataset.bags().iter().zip(dataset.ids()) {
        writeln!(w, "bag {id} {} {}", bag.label(), bag.len())?;
        for (i, x) in bag.instances().enumerate() {
            match bag.tags() {
                Some(tags) => writeln!(w, "{},{}", join(x), tag_token(tags[i]))?,
                None => writeln!(w, "{}", join(x))?,
            }
        }
    }
    Ok(())
}

fn join(values: &[f64]) -> String {
    // `{}` on f64 prints the shortest string that parses back to the same bits
    values
        .iter()
        .map(|v| format!("{v}"))
        .collect::<Vec<_>>()
        .join(",")
}

fn tag_token(tag: InstanceTag) -> String {
    match tag {
        InstanceTag::Key(c) => c.to_string(),
        InstanceTag::Neutral => "0".into(),
        InstanceTag::Unlabeled => "-".into(),
    }
}

fn parse_tag(token: &str, line: usize) -> Result<InstanceTag> {
    match token {
        "-" => Ok(InstanceTag::Unlabeled),
        "0" => Ok(InstanceTag::Neutral),
        t => t
            .parse::<usize>()
            .map(InstanceTag::Key)
            .map_err(|_| Error::parse(line, format!("bad tag `{t}`"))),
    }
}

fn parse_float(token: &str, line: usize) -> Result<f64> {
    let v: f64 = token
        .trim()
        .parse()
        .map_err(|_| Error::parse(line, format!("bad number `{token}`")))?;
    if !v.is_finite() {
        return Err(Error::parse(line, format!("non-finite value `{token}`")));
    }
    Ok(v)
}

struct Header {
    classes: usize,
    dim: usize,
    rule: ClassRule,
    splits: [usize; 3],
}

fn parse_header(text: &str) -> Result<Header> {
    let mut parts = text.split_whitespace();
    if parts.next() != Some(MAGIC) {
        return Err(Error::parse(1, "missing `milbags` header"));
    }
    match parts.next() {
        Some(VERSION) => {}
        Some(v) => return Err(Error::parse(1, format!("unsupported version `{v}`"))),
        None => return Err(Error::parse(1, "missing version")),
    }
    let (mut classes, mut dim, mut rule, mut splits) = (None, None, None, [None; 3]);
    for field in parts {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| Error::parse(1, format!("expected key=value, got `{field}`")))?;
        let number = || {
            value
                .parse::<usize>()
                .map_err(|_| Error::parse(1, format!("bad value for `{key}`")))
        };
        match key {
            "classes" => classes = Some(number()?),
            "dim" => dim = Some(number()?),
            "rule" => rule = Some(value.to_string()),
            "train" => splits[0] = Some(number()?),
            "val" => splits[1] = Some(number()?),
            "test" => splits[2] = Some(number()?),
            _ => return Err(Error::parse(1, format!("unknown header field `{key}`"))),
        }
    }
    let missing = |name: &str| Error::parse(1, format!("header lacks `{name}`"));
    let classes = classes.ok_or_else(|| missing("classes"))?;
    let dim = dim.ok_or_else(|| missing("dim"))?;
    if dim == 0 {
        return Err(Error::Schema("dimension must be at least 1".into()));
    }
    let rule_name = rule.ok_or_else(|| missing("rule"))?;
    let rule = ClassRule::from_name(&rule_name, classes).ok_or_else(|| {
        Error::Schema(format!("rule `{rule_name}` is invalid for {classes} classes"))
    })?;
    let splits = [
        splits[0].ok_or_else(|| missing("train"))?,
        splits[1].ok_or_else(|| missing("val"))?,
        splits[2].ok_or_else(|| missing("test"))?,
    ];
    Ok(Header {
        classes,
        dim,
        rule,
        splits,
    })
}

pub fn read_dataset<R: Read>(reader: R) -> Result<Dataset> {
    let mut lines = BufReader::new(reader)
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l));
    let (_, first) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "empty dataset file"))?;
    let header = parse_header(&first?)?;
    let total: usize = header.splits.iter().sum();

    let mut centers = Vec::new();
    let mut bags = Vec::with_capacity(total);
    let mut ids = Vec::with_capacity(total);
    let mut pending: Option<(usize, String)> = None;

    loop {
        let (lineno, text) = match pending.take() {
            Some(p) => p,
            None => match lines.next() {
                Some((n, l)) => (n, l?),
                None => break,
            },
        };
        let mut fields = text.split_whitespace();
        match fields.next() {
            Some("center") if bags.is_empty() => {
                let tag = parse_tag(fields.next().unwrap_or(""), lineno)?;
                let values = fields
                    .next()
                    .ok_or_else(|| Error::parse(lineno, "center without values"))?;
                if fields.next().is_some() {
                    return Err(Error::parse(lineno, "trailing fields after center"));
                }
                let mean = values
                    .split(',')
                    .map(|t| parse_float(t, lineno))
                    .collect::<Result<Vec<_>>>()?;
                if mean.len() != header.dim {
                    return Err(Error::Schema(format!(
                        "line {lineno}: center has {} values, dim is {}",
                        mean.len(),
                        header.dim
                    )));
                }
                centers.push(Center { tag, mean });
            }
            Some("bag") => {
                let mut next_num = |what: &str| -> Result<u64> {
                    fields
                        .next()
                        .ok_or_else(|| Error::parse(lineno, format!("bag record lacks {what}")))?
                        .parse::<u64>()
                        .map_err(|_| Error::parse(lineno, format!("bad {what}")))
                };
                let id = next_num("id")?;
                let label = next_num("label")? as usize;
                let k = next_num("size")? as usize;
                if fields.next().is_some() {
                    return Err(Error::parse(lineno, "trailing fields after bag record"));
                }
                if k == 0 {
                    return Err(Error::parse(lineno, "bag of size 0"));
                }
                if label >= header.classes {
                    return Err(Error::Schema(format!(
                        "line {lineno}: label {label} outside 0..{}",
                        header.classes
                    )));
                }
                let mut data = Vec::with_capacity(k * header.dim);
                let mut tags = Vec::with_capacity(k);
                let mut tagged = None;
                for _ in 0..k {
                    let (rn, row) = match lines.next() {
                        Some((n, l)) => (n, l?),
                        None => return Err(Error::parse(lineno, "bag truncated at end of file")),
                    };
                    let tokens: Vec<&str> = row.split(',').collect();
                    let has_tag = match tokens.len() {
                        n if n == header.dim => false,
                        n if n == header.dim + 1 => true,
                        n => {
                            return Err(Error::Schema(format!(
                                "line {rn}: {n} fields, expected {} or {}",
                                header.dim,
                                header.dim + 1
                            )))
                        }
                    };
                    if *tagged.get_or_insert(has_tag) != has_tag {
                        return Err(Error::parse(rn, "tag column present on some rows only"));
                    }
                    for t in &tokens[..header.dim] {
                        data.push(parse_float(t, rn)?);
                    }
                    if has_tag {
                        tags.push(parse_tag(tokens[header.dim].trim(), rn)?);
                    }
                }
                let mut bag = Bag::from_flat(data, header.dim, label)?;
                if tagged == Some(true) {
                    bag = bag.with_tags(tags)?;
                }
                bags.push(bag);
                ids.push(id);
            }
            Some(other) => {
                return Err(Error::parse(lineno, format!("unexpected `{other}`")));
            }
            None => return Err(Error::parse(lineno, "blank line")),
        }
        if bags.len() > total {
            return Err(Error::parse(lineno, "more bags than the header declares"));
        }
    }
    if bags.len() != total {
        return Err(Error::Schema(format!(
            "header declares {total} bags, file holds {}",
            bags.len()
        )));
    }
    Dataset::new(bags, ids, header.rule, header.splits, centers)
}
