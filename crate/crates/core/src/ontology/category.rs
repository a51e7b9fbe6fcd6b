use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// The nine response-phase event types plus the `Other` catch-all.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventCategory {
    /// Preventative measure.
    Pre,
    /// Help and rescue.
    Res,
    /// Casualty.
    Cas,
    /// Housing.
    Hou,
    /// Utilities and supplies.
    Uti,
    /// Transportation.
    Tra,
    /// Flood control infrastructure.
    Fci,
    /// Business, work, school.
    Bws,
    /// Built-environment hazards.
    Haz,
    Other,
}

pub const NUM_CLASSES: usize = 10;
pub const NUM_EVENTS: usize = 9;

impl EventCategory {
    pub const ALL: [EventCategory; NUM_CLASSES] = [
        EventCategory::Pre,
        EventCategory::Res,
        EventCategory::Cas,
        EventCategory::Hou,
        EventCategory::Uti,
        EventCategory::Tra,
        EventCategory::Fci,
        EventCategory::Bws,
        EventCategory::Haz,
        EventCategory::Other,
    ];

    pub const EVENTS: [EventCategory; NUM_EVENTS] = [
        EventCategory::Pre,
        EventCategory::Res,
        EventCategory::Cas,
        EventCategory::Hou,
        EventCategory::Uti,
        EventCategory::Tra,
        EventCategory::Fci,
        EventCategory::Bws,
        EventCategory::Haz,
    ];

    pub fn ordinal(self) -> usize {
        self as usize
    }

    pub fn from_ordinal(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn code(self) -> &'static str {
        match self {
            EventCategory::Pre => "PRE",
            EventCategory::Res => "RES",
            EventCategory::Cas => "CAS",
            EventCategory::Hou => "HOU",
            EventCategory::Uti => "UTI",
            EventCategory::Tra => "TRA",
            EventCategory::Fci => "FCI",
            EventCategory::Bws => "BWS",
            EventCategory::Haz => "HAZ",
            EventCategory::Other => "OTHER",
        }
    }

    pub fn is_event(self) -> bool {
        self != EventCategory::Other
    }
}

impl fmt::Display for EventCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown event category {0:?}")]
pub struct UnknownCategory(pub String);

impl FromStr for EventCategory {
    type Err = UnknownCategory;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let up = s.trim().to_ascii_uppercase();
        EventCategory::ALL
            .into_iter()
            .find(|c| c.code() == up)
            .ok_or_else(|| UnknownCategory(s.to_string()))
    }
}

impl Serialize for EventCategory {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.code())
    }
}

impl<'de> Deserialize<'de> for EventCategory {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A set of categories stored as a bitmask, iterated in ordinal order.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct LabelSet(u16);

impl LabelSet {
    pub const fn empty() -> Self {
        LabelSet(0)
    }

    pub fn single(c: EventCategory) -> Self {
        LabelSet(1 << c.ordinal())
    }

    pub fn other() -> Self {
        Self::single(EventCategory::Other)
    }

    pub fn insert(&mut self, c: EventCategory) {
        self.0 |= 1 << c.ordinal();
    }

    pub fn remove(&mut self, c: EventCategory) {
        self.0 &= !(1 << c.ordinal());
    }

    pub fn contains(self, c: EventCategory) -> bool {
        self.0 & (1 << c.ordinal()) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn has_event(self) -> bool {
        !self.events_only().is_empty()
    }

    pub fn events_only(self) -> Self {
        let mut s = self;
        s.remove(EventCategory::Other);
        s
    }

    /// Event categories if any are present, otherwise `{Other}`.
    pub fn normalized(self) -> Self {
        let ev = self.events_only();
        if ev.is_empty() {
            LabelSet::other()
        } else {
            ev
        }
    }

    pub fn iter(self) -> impl Iterator<Item = EventCategory> {
        EventCategory::ALL.into_iter().filter(move |&c| self.contains(c))
    }
}

impl FromIterator<EventCategory> for LabelSet {
    fn from_iter<I: IntoIterator<Item = EventCategory>>(iter: I) -> Self {
        let mut s = LabelSet::empty();
        for c in iter {
            s.insert(c);
        }
        s
    }
}

impl fmt::Debug for LabelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter().map(|c| c.code())).finish()
    }
}

impl fmt::Display for LabelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let codes: Vec<_> = self.iter().map(|c| c.code()).collect();
        write!(f, "{{{}}}", codes.join(","))
    }
}

impl Serialize for LabelSet {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for LabelSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Vec::<EventCategory>::deserialize(d)?;
        Ok(v.into_iter().collect())
    }
}
