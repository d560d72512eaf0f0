use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::syntax::{Message, Role};

/// Atomic exchange `sender -> receiver : message`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SyncEvent {
    pub sender: Role,
    pub receiver: Role,
    pub message: Message,
}

impl SyncEvent {
    pub fn new(sender: impl Into<Role>, receiver: impl Into<Role>, message: impl Into<Message>) -> Self {
        SyncEvent {
            sender: sender.into(),
            receiver: receiver.into(),
            message: message.into(),
        }
    }

    /// The send half followed by the receive half.
    pub fn split(&self) -> [AsyncEvent; 2] {
        [
            AsyncEvent::send(self.sender.clone(), self.receiver.clone(), self.message.clone()),
            AsyncEvent::receive(self.receiver.clone(), self.sender.clone(), self.message.clone()),
        ]
    }
}

impl fmt::Display for SyncEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}:{}", self.sender, self.receiver, self.message)
    }
}

impl Serialize for SyncEvent {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventKind {
    Send,
    Receive,
}

/// A send `active>peer!message` or a receive `active<peer?message`.
///
/// Ordering puts sends before receives, then orders by roles and message.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AsyncEvent {
    pub kind: EventKind,
    pub active: Role,
    pub peer: Role,
    pub message: Message,
}

impl AsyncEvent {
    pub fn send(active: impl Into<Role>, peer: impl Into<Role>, message: impl Into<Message>) -> Self {
        AsyncEvent {
            kind: EventKind::Send,
            active: active.into(),
            peer: peer.into(),
            message: message.into(),
        }
    }

    pub fn receive(active: impl Into<Role>, peer: impl Into<Role>, message: impl Into<Message>) -> Self {
        AsyncEvent {
            kind: EventKind::Receive,
            active: active.into(),
            peer: peer.into(),
            message: message.into(),
        }
    }

    pub fn is_send(&self) -> bool {
        self.kind == EventKind::Send
    }

    pub fn is_receive(&self) -> bool {
        self.kind == EventKind::Receive
    }

    /// For a receive `p<q?m`, the send `q>p!m` it consumes; for a send, itself.
    pub fn matching_send(&self) -> AsyncEvent {
        match self.kind {
            EventKind::Send => self.clone(),
            EventKind::Receive => AsyncEvent::send(self.peer.clone(), self.active.clone(), self.message.clone()),
        }
    }

    /// Channel `(from, to)` the event writes to or reads from.
    pub fn channel(&self) -> (Role, Role) {
        match self.kind {
            EventKind::Send => (self.active.clone(), self.peer.clone()),
            EventKind::Receive => (self.peer.clone(), self.active.clone()),
        }
    }
}

impl fmt::Display for AsyncEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            EventKind::Send => write!(f, "{}>{}!{}", self.active, self.peer, self.message),
            EventKind::Receive => write!(f, "{}<{}?{}", self.active, self.peer, self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed event `{0}`: expected `p>q!m` or `p<q?m`")]
pub struct EventParseError(pub String);

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '\'')
}

impl FromStr for AsyncEvent {
    type Err = EventParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || EventParseError(s.to_string());
        let (kind, sep, mark) = if s.contains('>') {
            (EventKind::Send, '>', '!')
        } else {
            (EventKind::Receive, '<', '?')
        };
        let (active, rest) = s.split_once(sep).ok_or_else(err)?;
        let (peer, message) = rest.split_once(mark).ok_or_else(err)?;
        if ![active, peer, message].iter().all(|p| is_ident(p)) || active == peer {
            return Err(err());
        }
        Ok(AsyncEvent {
            kind,
            active: Role::new(active),
            peer: Role::new(peer),
            message: Message::new(message),
        })
    }
}

impl Serialize for AsyncEvent {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for AsyncEvent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub fn split_word(w: &[SyncEvent]) -> Vec<AsyncEvent> {
    w.iter().flat_map(|e| e.split()).collect()
}

/// Keeps the events whose active role is `p`, in order.
pub fn project_word(w: &[AsyncEvent], p: &Role) -> Vec<AsyncEvent> {
    w.iter().filter(|e| e.active == *p).cloned().collect()
}
