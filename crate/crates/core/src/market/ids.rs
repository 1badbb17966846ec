use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TradeId(pub u32);

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "agent {}", self.0)
    }
}

impl fmt::Display for TradeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "trade {}", self.0)
    }
}

/// Which end of a trade an offer belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Buyer,
    Seller,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Buyer => Side::Seller,
            Side::Seller => Side::Buyer,
        }
    }
}

/// A bilateral contract arc from `seller` to `buyer`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Trade {
    pub id: TradeId,
    pub buyer: AgentId,
    pub seller: AgentId,
}

impl Trade {
    pub fn new(id: u32, seller: u32, buyer: u32) -> Self {
        Trade {
            id: TradeId(id),
            buyer: AgentId(buyer),
            seller: AgentId(seller),
        }
    }

    /// +1 for the buyer, -1 for the seller, 0 for anyone else.
    pub fn sign_for(&self, agent: AgentId) -> i64 {
        if agent == self.buyer {
            1
        } else if agent == self.seller {
            -1
        } else {
            0
        }
    }

    pub fn involves(&self, agent: AgentId) -> bool {
        self.buyer == agent || self.seller == agent
    }

    pub fn counterpart(&self, agent: AgentId) -> Option<AgentId> {
        if agent == self.buyer {
            Some(self.seller)
        } else if agent == self.seller {
            Some(self.buyer)
        } else {
            None
        }
    }

    pub fn side_of(&self, agent: AgentId) -> Option<Side> {
        if agent == self.buyer {
            Some(Side::Buyer)
        } else if agent == self.seller {
            Some(Side::Seller)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Buyer,
    Seller,
    Intermediary,
    #[default]
    Trader,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Role::Buyer => "buyer",
            Role::Seller => "seller",
            Role::Intermediary => "intermediary",
            Role::Trader => "trader",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Agent {
    pub id: AgentId,
    #[serde(default)]
    pub role: Role,
}

impl Agent {
    pub fn new(id: u32, role: Role) -> Self {
        Agent { id: AgentId(id), role }
    }
}
