//! Aircraft activity states and the legal moves between them.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Process {
    Idle,
    Disembarking,
    PreCharge,
    Charging,
    PostCharge,
    Boarding,
    Pushback,
    Taxi,
    HoverClimb,
    ClimbTransition,
    Climb,
    Cruise,
    Holding,
    Descent,
    DescentTransition,
    HoverDescent,
}

/// Utilization buckets for fleet-hour accounting.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Idle,
    Charge,
    Cruise,
    Holding,
    Other,
}

impl Category {
    pub const ALL: [Category; 5] =
        [Category::Idle, Category::Charge, Category::Cruise, Category::Holding, Category::Other];

    pub fn name(self) -> &'static str {
        match self {
            Category::Idle => "idle",
            Category::Charge => "charge",
            Category::Cruise => "cruise",
            Category::Holding => "holding",
            Category::Other => "other",
        }
    }
}

impl Process {
    pub const ALL: [Process; 16] = [
        Process::Idle,
        Process::Disembarking,
        Process::PreCharge,
        Process::Charging,
        Process::PostCharge,
        Process::Boarding,
        Process::Pushback,
        Process::Taxi,
        Process::HoverClimb,
        Process::ClimbTransition,
        Process::Climb,
        Process::Cruise,
        Process::Holding,
        Process::Descent,
        Process::DescentTransition,
        Process::HoverDescent,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Process::Idle => "idle",
            Process::Disembarking => "disembarking",
            Process::PreCharge => "pre_charge",
            Process::Charging => "charging",
            Process::PostCharge => "post_charge",
            Process::Boarding => "boarding",
            Process::Pushback => "pushback",
            Process::Taxi => "taxi",
            Process::HoverClimb => "hover_climb",
            Process::ClimbTransition => "climb_transition",
            Process::Climb => "climb",
            Process::Cruise => "cruise",
            Process::Holding => "holding",
            Process::Descent => "descent",
            Process::DescentTransition => "descent_transition",
            Process::HoverDescent => "hover_descent",
        }
    }

    pub fn from_name(name: &str) -> Option<Process> {
        Process::ALL.into_iter().find(|p| p.name() == name)
    }

    pub fn category(self) -> Category {
        match self {
            Process::Idle => Category::Idle,
            Process::Charging => Category::Charge,
            Process::Cruise => Category::Cruise,
            Process::Holding => Category::Holding,
            _ => Category::Other,
        }
    }

    pub fn is_airborne(self) -> bool {
        matches!(
            self,
            Process::HoverClimb
                | Process::ClimbTransition
                | Process::Climb
                | Process::Cruise
                | Process::Holding
                | Process::Descent
                | Process::DescentTransition
                | Process::HoverDescent
        )
    }

    /// Whether `self -> next` is an edge of the process graph.
    pub fn can_become(self, next: Process) -> bool {
        use Process::*;
        matches!(
            (self, next),
            (Idle, Boarding | Pushback | PreCharge)
                | (Disembarking, PreCharge | Idle)
                | (PreCharge, Charging)
                | (Charging, PostCharge)
                | (PostCharge, Idle | Boarding | Pushback)
                | (Boarding, Pushback)
                | (Pushback, Taxi)
                | (Taxi, HoverClimb | Disembarking | PreCharge | Idle)
                | (HoverClimb, ClimbTransition)
                | (ClimbTransition, Climb)
                | (Climb, Cruise)
                | (Cruise, Holding)
                | (Holding, Descent)
                | (Descent, DescentTransition)
                | (DescentTransition, HoverDescent)
                | (HoverDescent, Taxi)
        )
    }
}

impl fmt::Display for Process {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for p in Process::ALL {
            assert_eq!(Process::from_name(p.name()), Some(p));
        }
        assert_eq!(Process::from_name("warp"), None);
    }

    #[test]
    fn flight_cycle_is_legal() {
        use Process::*;
        let cycle = [
            Idle,
            Boarding,
            Pushback,
            Taxi,
            HoverClimb,
            ClimbTransition,
            Climb,
            Cruise,
            Holding,
            Descent,
            DescentTransition,
            HoverDescent,
            Taxi,
            Disembarking,
            PreCharge,
            Charging,
            PostCharge,
            Idle,
        ];
        assert!(cycle.windows(2).all(|w| w[0].can_become(w[1])));
        assert!(!Idle.can_become(Cruise));
        assert!(!Charging.can_become(Idle));
    }

    #[test]
    fn categories() {
        assert_eq!(Process::Charging.category(), Category::Charge);
        assert_eq!(Process::PreCharge.category(), Category::Other);
        assert_eq!(Process::Taxi.category(), Category::Other);
        assert_eq!(Process::Holding.category(), Category::Holding);
    }
}
