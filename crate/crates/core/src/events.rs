//! The event log.
//!
//! One record per line, `t=<step> event=<kind> agent=<id>` followed by
//! kind-specific fields in a fixed order. Coordinates are written `x,y`.
//!
//! | kind      | fields                              |
//! |-----------|-------------------------------------|
//! | move      | `from=x,y to=x,y`                   |
//! | delay     | `at=x,y forced=0\|1`                |
//! | assign    | `task=<id> pickup=x,y delivery=x,y` |
//! | replan    | `ok=0\|1`                           |
//! | collision | `other=<id> kind=vertex\|swap at=x,y` |
//! | deadlock  | `walk=<len>`                        |
//! | complete  | `task=<id>`                         |
//!
//! `move` records are stamped with the step the agent arrives (or stays)
//! at, `complete` with the step the delivery vertex is reached. Delays and
//! planning decisions carry the step at which they are decided, so a delay
//! at `t` shows up as a wait in the `move` record stamped `t + 1`. Every agent
//! gets exactly one `move` record per step, a wait being `from == to`.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::Time;

pub type Coord = (u32, u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CollisionKind {
    Vertex,
    Swap,
}

impl fmt::Display for CollisionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CollisionKind::Vertex => "vertex",
            CollisionKind::Swap => "swap",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Event {
    Move { t: Time, agent: usize, from: Coord, to: Coord },
    Delay { t: Time, agent: usize, at: Coord, forced: bool },
    Assign { t: Time, agent: usize, task: usize, pickup: Coord, delivery: Coord },
    Replan { t: Time, agent: usize, ok: bool },
    Collision { t: Time, agent: usize, other: usize, kind: CollisionKind, at: Coord },
    Deadlock { t: Time, agent: usize, walk: usize },
    Complete { t: Time, agent: usize, task: usize },
}

impl Event {
    pub fn time(&self) -> Time {
        match *self {
            Event::Move { t, .. }
            | Event::Delay { t, .. }
            | Event::Assign { t, .. }
            | Event::Replan { t, .. }
            | Event::Collision { t, .. }
            | Event::Deadlock { t, .. }
            | Event::Complete { t, .. } => t,
        }
    }

    pub fn agent(&self) -> usize {
        match *self {
            Event::Move { agent, .. }
            | Event::Delay { agent, .. }
            | Event::Assign { agent, .. }
            | Event::Replan { agent, .. }
            | Event::Collision { agent, .. }
            | Event::Deadlock { agent, .. }
            | Event::Complete { agent, .. } => agent,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Event::Move { .. } => "move",
            Event::Delay { .. } => "delay",
            Event::Assign { .. } => "assign",
            Event::Replan { .. } => "replan",
            Event::Collision { .. } => "collision",
            Event::Deadlock { .. } => "deadlock",
            Event::Complete { .. } => "complete",
        }
    }
}

struct Xy(Coord);

impl fmt::Display for Xy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.0 .0, self.0 .1)
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t={} event={} agent={}", self.time(), self.kind(), self.agent())?;
        match *self {
            Event::Move { from, to, .. } => write!(f, " from={} to={}", Xy(from), Xy(to)),
            Event::Delay { at, forced, .. } => write!(f, " at={} forced={}", Xy(at), u8::from(forced)),
            Event::Assign { task, pickup, delivery, .. } => {
                write!(f, " task={task} pickup={} delivery={}", Xy(pickup), Xy(delivery))
            }
            Event::Replan { ok, .. } => write!(f, " ok={}", u8::from(ok)),
            Event::Collision { other, kind, at, .. } => write!(f, " other={other} kind={kind} at={}", Xy(at)),
            Event::Deadlock { walk, .. } => write!(f, " walk={walk}"),
            Event::Complete { task, .. } => write!(f, " task={task}"),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EventParseError {
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
}

struct Fields<'a> {
    items: Vec<(&'a str, &'a str)>,
    pos: usize,
}

impl<'a> Fields<'a> {
    fn new(line: &'a str) -> Result<Self, String> {
        let items = line
            .split_whitespace()
            .map(|tok| tok.split_once('=').ok_or_else(|| format!("field {tok:?} lacks '='")))
            .collect::<Result<_, _>>()?;
        Ok(Fields { items, pos: 0 })
    }

    fn take(&mut self, key: &str) -> Result<&'a str, String> {
        match self.items.get(self.pos) {
            Some(&(k, v)) if k == key => {
                self.pos += 1;
                Ok(v)
            }
            Some(&(k, _)) => Err(format!("expected field {key:?}, found {k:?}")),
            None => Err(format!("missing field {key:?}")),
        }
    }

    fn num<T: FromStr>(&mut self, key: &str) -> Result<T, String> {
        let v = self.take(key)?;
        v.parse().map_err(|_| format!("bad value {v:?} for {key}"))
    }

    fn flag(&mut self, key: &str) -> Result<bool, String> {
        match self.take(key)? {
            "0" => Ok(false),
            "1" => Ok(true),
            v => Err(format!("bad flag {v:?} for {key}")),
        }
    }

    fn coord(&mut self, key: &str) -> Result<Coord, String> {
        let v = self.take(key)?;
        let (x, y) = v.split_once(',').ok_or_else(|| format!("bad coordinate {v:?}"))?;
        match (x.parse(), y.parse()) {
            (Ok(x), Ok(y)) => Ok((x, y)),
            _ => Err(format!("bad coordinate {v:?}")),
        }
    }

    fn finish(&self) -> Result<(), String> {
        match self.items.get(self.pos) {
            None => Ok(()),
            Some((k, _)) => Err(format!("unexpected field {k:?}")),
        }
    }
}

fn parse_line(line: &str) -> Result<Event, String> {
    let mut f = Fields::new(line)?;
    let t = f.num("t")?;
    let kind = f.take("event")?;
    let agent = f.num("agent")?;
    let ev = match kind {
        "move" => Event::Move { t, agent, from: f.coord("from")?, to: f.coord("to")? },
        "delay" => Event::Delay { t, agent, at: f.coord("at")?, forced: f.flag("forced")? },
        "assign" => {
            Event::Assign { t, agent, task: f.num("task")?, pickup: f.coord("pickup")?, delivery: f.coord("delivery")? }
        }
        "replan" => Event::Replan { t, agent, ok: f.flag("ok")? },
        "collision" => {
            let other = f.num("other")?;
            let kind = match f.take("kind")? {
                "vertex" => CollisionKind::Vertex,
                "swap" => CollisionKind::Swap,
                k => return Err(format!("unknown collision kind {k:?}")),
            };
            Event::Collision { t, agent, other, kind, at: f.coord("at")? }
        }
        "deadlock" => Event::Deadlock { t, agent, walk: f.num("walk")? },
        "complete" => Event::Complete { t, agent, task: f.num("task")? },
        k => return Err(format!("unknown event kind {k:?}")),
    };
    f.finish()?;
    Ok(ev)
}

impl FromStr for Event {
    type Err = EventParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_line(s).map_err(|msg| EventParseError::Malformed { line: 1, msg })
    }
}

/// Parses a whole log; blank lines and `#` comments are skipped.
pub fn parse_log(text: &str) -> Result<Vec<Event>, EventParseError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, l)| parse_line(l).map_err(|msg| EventParseError::Malformed { line: i + 1, msg }))
        .collect()
}

pub fn write_log(events: &[Event]) -> String {
    let mut out = String::with_capacity(events.len() * 48);
    for e in events {
        out.push_str(&e.to_string());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_every_kind() {
        let events = vec![
            Event::Move { t: 1, agent: 0, from: (0, 0), to: (1, 0) },
            Event::Delay { t: 6, agent: 1, at: (2, 3), forced: false },
            Event::Assign { t: 0, agent: 2, task: 4, pickup: (1, 1), delivery: (5, 5) },
            Event::Replan { t: 6, agent: 0, ok: true },
            Event::Collision { t: 6, agent: 0, other: 1, kind: CollisionKind::Swap, at: (2, 2) },
            Event::Deadlock { t: 9, agent: 3, walk: 5 },
            Event::Complete { t: 12, agent: 2, task: 4 },
        ];
        let text = write_log(&events);
        assert_eq!(parse_log(&text).unwrap(), events);
        assert_eq!(events[0].to_string(), "t=1 event=move agent=0 from=0,0 to=1,0");
    }

    #[test]
    fn rejects_reordered_fields() {
        assert!("t=1 agent=0 event=move from=0,0 to=1,0".parse::<Event>().is_err());
        assert!("t=1 event=move agent=0 from=0,0".parse::<Event>().is_err());
        assert!("t=1 event=jump agent=0".parse::<Event>().is_err());
        let err = parse_log("t=0 event=replan agent=0 ok=1\nnonsense\n").unwrap_err();
        assert!(matches!(err, EventParseError::Malformed { line: 2, .. }));
    }
}
