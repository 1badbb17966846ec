use std::fmt;

use crate::dynamics::DynamicsTrace;
use crate::error::{Error, Result};
use crate::market::{Market, TradeId};

/// Whether a responder accepted (matched) or rejected a counterpart's offer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mark {
    A,
    R,
}

impl Mark {
    fn from_char(c: char) -> Option<Mark> {
        match c {
            'A' => Some(Mark::A),
            'R' => Some(Mark::R),
            _ => None,
        }
    }

    fn as_char(self) -> char {
        match self {
            Mark::A => 'A',
            Mark::R => 'R',
        }
    }
}

/// Accept/reject strings of a two-agent run: one row per trade, one column
/// per best response.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArRows {
    pub trades: Vec<TradeId>,
    pub rows: Vec<Vec<Mark>>,
}

impl ArRows {
    /// Parses rows written as strings over `A` and `R`.
    pub fn parse(rows: &[&str]) -> Result<ArRows> {
        let rows: Vec<Vec<Mark>> = rows
            .iter()
            .map(|r| {
                r.chars()
                    .map(|c| Mark::from_char(c).ok_or_else(|| Error::Domain(format!("bad row character {c:?}"))))
                    .collect()
            })
            .collect::<Result<_>>()?;
        if rows.windows(2).any(|w| w[0].len() != w[1].len()) {
            return Err(Error::Domain("rows differ in length".into()));
        }
        Ok(ArRows {
            trades: (0..rows.len() as u32).map(TradeId).collect(),
            rows,
        })
    }

    pub fn columns(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn column(&self, k: usize) -> Vec<Mark> {
        self.rows.iter().map(|r| r[k]).collect()
    }

    /// Columns `start..start + len`.
    pub fn window(&self, start: usize, len: usize) -> ArRows {
        ArRows {
            trades: self.trades.clone(),
            rows: self.rows.iter().map(|r| r[start..start + len].to_vec()).collect(),
        }
    }

    /// The rows followed by their first `extra` columns again, so that
    /// windows wrapping around a cycle can be scanned linearly.
    pub fn unrolled(&self, extra: usize) -> ArRows {
        let extra = extra.min(self.columns());
        ArRows {
            trades: self.trades.clone(),
            rows: self
                .rows
                .iter()
                .map(|r| r.iter().chain(&r[..extra]).copied().collect())
                .collect(),
        }
    }

    /// Index of the first pair of identical consecutive columns.
    pub fn first_repeated_column(&self) -> Option<usize> {
        (1..self.columns()).find(|&k| self.column(k - 1) == self.column(k))
    }

    /// True if every row holds both marks.
    pub fn rows_are_mixed(&self) -> bool {
        self.rows.iter().all(|r| r.contains(&Mark::A) && r.contains(&Mark::R))
    }
}

impl fmt::Display for ArRows {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, row) in self.rows.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            for m in row {
                write!(f, "{}", m.as_char())?;
            }
        }
        Ok(())
    }
}

/// Builds the rows of a recorded two-agent run.
pub fn ar_rows(market: &Market, trace: &DynamicsTrace) -> Result<ArRows> {
    if market.num_agents() != 2 {
        return Err(Error::Domain(format!(
            "accept/reject rows need exactly two agents, market has {}",
            market.num_agents()
        )));
    }
    let trades: Vec<TradeId> = market.trades().iter().map(|t| t.id).collect();
    let rows = trades
        .iter()
        .map(|t| {
            trace
                .steps
                .iter()
                .map(|s| if s.demanded.contains(t) { Mark::A } else { Mark::R })
                .collect()
        })
        .collect();
    Ok(ArRows { trades, rows })
}

/// A forbidden three-column fragment found in a pair of rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FragmentMatch {
    /// Fragment number, 1 to 5.
    pub fragment: u8,
    /// 1-based column where the window starts.
    pub column: usize,
    /// True if the match was against the row-swapped fragment.
    pub swapped: bool,
}

/// (top row, bottom row); `None` matches either mark.
type Pattern = [[Option<Mark>; 3]; 2];

const fn p(s: &[u8; 3]) -> [Option<Mark>; 3] {
    let mut out = [None; 3];
    let mut i = 0;
    while i < 3 {
        out[i] = match s[i] {
            b'A' => Some(Mark::A),
            b'R' => Some(Mark::R),
            _ => None,
        };
        i += 1;
    }
    out
}

const FRAGMENTS: [Pattern; 5] = [
    [p(b"AAR"), p(b"AR*")],
    [p(b"RAA"), p(b"RR*")],
    [p(b"AAR"), p(b"*AR")],
    [p(b"RRA"), p(b"ARA")],
    [p(b"RAR"), p(b"RRA")],
];

fn matches(pattern: &[Option<Mark>; 3], row: &[Mark]) -> bool {
    pattern.iter().zip(row).all(|(p, m)| p.is_none_or(|p| p == *m))
}

/// Scans every three-column window of a two-row string for the forbidden
/// fragments, in both row orders.
pub fn check_fragments(rows: &ArRows) -> Result<Vec<FragmentMatch>> {
    if rows.rows.len() != 2 {
        return Err(Error::Domain(format!(
            "fragment check needs two rows, got {}",
            rows.rows.len()
        )));
    }
    let (top, bottom) = (&rows.rows[0], &rows.rows[1]);
    let mut out = Vec::new();
    for start in 0..rows.columns().saturating_sub(2) {
        let (t, b) = (&top[start..start + 3], &bottom[start..start + 3]);
        for (i, frag) in FRAGMENTS.iter().enumerate() {
            for (swapped, (x, y)) in [(false, (t, b)), (true, (b, t))] {
                if matches(&frag[0], x) && matches(&frag[1], y) {
                    out.push(FragmentMatch {
                        fragment: i as u8 + 1,
                        column: start + 1,
                        swapped,
                    });
                }
            }
        }
    }
    Ok(out)
}
