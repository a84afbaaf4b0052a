//! Catalog, session, post and user-history text files.
//!
//! ```text
//! catalog     id<TAB>name=value;name=value;...
//! sessions    user_id<TAB>product_id:timestamp:kind,...
//! posts       post_id<TAB>product_id,product_id,...
//! histories   user_id<TAB>E:post:ts,...<TAB>V:post,...
//! ```

use std::fmt::Write as _;
use std::path::Path;

use prodembed_core::corpus::{Catalog, Event, EventKind, Post, Product, Session, UserHistory};

use super::{lines, read_text, write_bytes};
use crate::{Error, Result};

fn check_field(path: &Path, what: &str, s: &str, forbidden: &[char]) -> Result<()> {
    if s.is_empty() || s.contains(forbidden) || s.contains(['\t', '\n', '\r']) {
        return Err(Error::format(path, format!("{what} {s:?} is empty or contains a reserved character")));
    }
    Ok(())
}

pub fn parse_catalog(text: &str, path: &Path) -> Result<Catalog> {
    let mut products = Vec::new();
    for (n, line) in lines(text) {
        let (id, attrs) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(path, n, "expected `id<TAB>name=value;...`"))?;
        let mut pairs = Vec::new();
        for kv in attrs.split(';').filter(|s| !s.is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::parse(path, n, format!("attribute {kv:?} is not name=value")))?;
            pairs.push((k.to_string(), v.to_string()));
        }
        let p = Product::new(id, pairs).map_err(|e| Error::parse(path, n, e.to_string()))?;
        products.push(p);
    }
    Catalog::new(products).map_err(|e| Error::format(path, e.to_string()))
}

pub fn render_catalog(catalog: &Catalog, path: &Path) -> Result<String> {
    let mut out = String::new();
    for p in catalog.products() {
        check_field(path, "product id", &p.id, &[])?;
        out.push_str(&p.id);
        out.push('\t');
        for (i, (k, v)) in p.attributes().iter().enumerate() {
            check_field(path, "attribute", k, &[';', '='])?;
            check_field(path, "attribute value", v, &[';', '='])?;
            if i > 0 {
                out.push(';');
            }
            let _ = write!(out, "{k}={v}");
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn read_catalog(path: &Path) -> Result<Catalog> {
    parse_catalog(&read_text(path)?, path)
}

pub fn write_catalog(path: &Path, catalog: &Catalog) -> Result<()> {
    write_bytes(path, render_catalog(catalog, path)?.as_bytes())
}

pub fn parse_sessions(text: &str, path: &Path) -> Result<Vec<Session>> {
    let mut out = Vec::new();
    for (n, line) in lines(text) {
        let (user, events) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(path, n, "expected `user_id<TAB>product:ts:kind,...`"))?;
        let mut parsed = Vec::new();
        for ev in events.split(',').filter(|s| !s.is_empty()) {
            let mut it = ev.rsplitn(3, ':');
            let (kind, ts, pid) = match (it.next(), it.next(), it.next()) {
                (Some(k), Some(t), Some(p)) if !p.is_empty() => (k, t, p),
                _ => return Err(Error::parse(path, n, format!("event {ev:?} is not product:timestamp:kind"))),
            };
            let timestamp = ts
                .parse::<i64>()
                .map_err(|_| Error::parse(path, n, format!("bad timestamp {ts:?}")))?;
            let kind = EventKind::parse(kind).ok_or_else(|| Error::parse(path, n, format!("unknown event kind {kind:?}")))?;
            parsed.push(Event { product_id: pid.to_string(), timestamp, kind });
        }
        out.push(Session { user_id: user.to_string(), events: parsed });
    }
    Ok(out)
}

pub fn render_sessions(sessions: &[Session], path: &Path) -> Result<String> {
    let mut out = String::new();
    for s in sessions {
        check_field(path, "user id", &s.user_id, &[])?;
        out.push_str(&s.user_id);
        out.push('\t');
        for (i, e) in s.events.iter().enumerate() {
            check_field(path, "product id", &e.product_id, &[','])?;
            if i > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}:{}:{}", e.product_id, e.timestamp, e.kind.as_str());
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn read_sessions(path: &Path) -> Result<Vec<Session>> {
    parse_sessions(&read_text(path)?, path)
}

pub fn write_sessions(path: &Path, sessions: &[Session]) -> Result<()> {
    write_bytes(path, render_sessions(sessions, path)?.as_bytes())
}

pub fn parse_posts(text: &str, path: &Path) -> Result<Vec<Post>> {
    let mut out = Vec::new();
    for (n, line) in lines(text) {
        let (id, tags) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(path, n, "expected `post_id<TAB>product,...`"))?;
        let product_ids: Vec<String> = tags.split(',').filter(|s| !s.is_empty()).map(str::to_string).collect();
        if product_ids.is_empty() {
            return Err(Error::parse(path, n, format!("post {id:?} tags no products")));
        }
        out.push(Post { id: id.to_string(), product_ids });
    }
    Ok(out)
}

pub fn render_posts(posts: &[Post], path: &Path) -> Result<String> {
    let mut out = String::new();
    for p in posts {
        check_field(path, "post id", &p.id, &[',', ':'])?;
        for t in &p.product_ids {
            check_field(path, "product id", t, &[','])?;
        }
        let _ = writeln!(out, "{}\t{}", p.id, p.product_ids.join(","));
    }
    Ok(out)
}

pub fn read_posts(path: &Path) -> Result<Vec<Post>> {
    parse_posts(&read_text(path)?, path)
}

pub fn write_posts(path: &Path, posts: &[Post]) -> Result<()> {
    write_bytes(path, render_posts(posts, path)?.as_bytes())
}

pub fn parse_histories(text: &str, path: &Path) -> Result<Vec<UserHistory>> {
    let mut out = Vec::new();
    for (n, line) in lines(text) {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::parse(path, n, "expected `user_id<TAB>E:post:ts,...<TAB>V:post,...`"));
        }
        let mut engaged = Vec::new();
        for item in fields[1].split(',').filter(|s| !s.is_empty()) {
            let (post, ts) = item
                .strip_prefix("E:")
                .and_then(|r| r.rsplit_once(':'))
                .ok_or_else(|| Error::parse(path, n, format!("engagement {item:?} is not E:post:ts")))?;
            let ts = ts
                .parse::<i64>()
                .map_err(|_| Error::parse(path, n, format!("bad timestamp {ts:?}")))?;
            engaged.push((post.to_string(), ts));
        }
        let mut viewed = Vec::new();
        for item in fields[2].split(',').filter(|s| !s.is_empty()) {
            let post = item
                .strip_prefix("V:")
                .ok_or_else(|| Error::parse(path, n, format!("view {item:?} is not V:post")))?;
            viewed.push(post.to_string());
        }
        out.push(UserHistory { user_id: fields[0].to_string(), engaged, viewed });
    }
    Ok(out)
}

pub fn render_histories(histories: &[UserHistory], path: &Path) -> Result<String> {
    let mut out = String::new();
    for h in histories {
        check_field(path, "user id", &h.user_id, &[])?;
        let engaged: Vec<String> = h.engaged.iter().map(|(p, ts)| format!("E:{p}:{ts}")).collect();
        let viewed: Vec<String> = h.viewed.iter().map(|p| format!("V:{p}")).collect();
        let _ = writeln!(out, "{}\t{}\t{}", h.user_id, engaged.join(","), viewed.join(","));
    }
    Ok(out)
}

pub fn read_histories(path: &Path) -> Result<Vec<UserHistory>> {
    parse_histories(&read_text(path)?, path)
}

pub fn write_histories(path: &Path, histories: &[UserHistory]) -> Result<()> {
    write_bytes(path, render_histories(histories, path)?.as_bytes())
}
