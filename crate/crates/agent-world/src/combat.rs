//! Closed-form combat resolution.
//!
//! A warrior with attack `a`, defense `d`, life `l` fights a monster with
//! `a_m`, `d_m`, `l_m`. The warrior needs `ceil(l_m / (a - d_m))` strikes
//! to fell it; the monster lands `max(a_m - d, 0)` per exchange. With
//! `StrikeRule::Turns` the monster strikes back in every exchange including
//! the final one; `TurnsMinusOne` skips the strike after the killing blow.
//! Vampires additionally drain `floor(pct * current_life)` after each of
//! their strikes. The warrior survives as long as residual life is not
//! strictly negative: residual 0 is a survival.

use serde::{Deserialize, Serialize};

use crate::types::{MonsterKind, Stats};

/// How many times the monster strikes relative to the warrior's strike
/// count. `Turns` is the default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StrikeRule {
    #[default]
    Turns,
    TurnsMinusOne,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct CombatRules {
    pub monster_strikes: StrikeRule,
}

/// Outcome of one resolved combat. `feasible` is false exactly when the
/// warrior's attack cannot exceed the monster's defense; in that case no
/// damage is exchanged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CombatOutcome {
    pub feasible: bool,
    pub turns: Option<u32>,
    pub damage_taken: u32,
    pub residual_life: i64,
}

impl CombatOutcome {
    /// Strictly negative residual life is lethal; residual 0 survives.
    pub fn lethal(&self) -> bool {
        self.feasible && self.residual_life < 0
    }
}

/// Resolve a combat without mutating anything. Total over all inputs.
pub fn resolve_combat(
    player: &Stats,
    monster: &Stats,
    kind: &MonsterKind,
    rules: &CombatRules,
) -> CombatOutcome {
    if player.attack <= monster.defense {
        return CombatOutcome {
            feasible: false,
            turns: None,
            damage_taken: 0,
            residual_life: player.life as i64,
        };
    }

    let per_strike = player.attack - monster.defense;
    let turns = monster.life.div_ceil(per_strike).max(1);
    let strikes = match rules.monster_strikes {
        StrikeRule::Turns => turns,
        StrikeRule::TurnsMinusOne => turns - 1,
    };
    let dmg = monster.attack.saturating_sub(player.defense) as i64;

    let residual = match kind {
        MonsterKind::Vampire { lifesteal_pct } => {
            let mut life = player.life as i64;
            for _ in 0..strikes {
                life -= dmg;
                life -= drain(*lifesteal_pct, life);
            }
            life
        }
        _ => player.life as i64 - dmg.saturating_mul(strikes as i64),
    };

    CombatOutcome {
        feasible: true,
        turns: Some(turns),
        damage_taken: (player.life as i64 - residual).max(0) as u32,
        residual_life: residual,
    }
}

/// Lifesteal per exchange: a floor fraction of the warrior's current life,
/// never negative.
fn drain(pct: f64, life: i64) -> i64 {
    (pct * life.max(0) as f64).floor() as i64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn normal(attack: u32, defense: u32, life: u32) -> (Stats, MonsterKind) {
        (Stats::new(attack, defense, life), MonsterKind::Normal)
    }

    #[test]
    fn appendix_example_residual_zero_survives() {
        // Warrior 100/10/5 vs monster with life 50, attack 15, defense 5.
        let player = Stats::new(10, 5, 100);
        let (m, kind) = normal(15, 5, 50);
        let out = resolve_combat(&player, &m, &kind, &CombatRules::default());
        assert!(out.feasible);
        assert_eq!(out.turns, Some(10));
        assert_eq!(out.damage_taken, 100);
        assert_eq!(out.residual_life, 0);
        assert!(!out.lethal());
    }

    #[test]
    fn infeasible_when_attack_at_most_defense() {
        let player = Stats::new(5, 5, 100);
        let (m, kind) = normal(15, 5, 50);
        let out = resolve_combat(&player, &m, &kind, &CombatRules::default());
        assert!(!out.feasible);
        assert_eq!(out.turns, None);
        assert_eq!(out.damage_taken, 0);
    }

    #[test]
    fn ceil_division_rounds_strike_count_up() {
        // Warrior 12/8/535 vs monster 15/5/50: 50/(12-5) -> 8 strikes,
        // (15-8)*8 = 56 damage.
        let player = Stats::new(12, 8, 535);
        let (m, kind) = normal(15, 5, 50);
        let out = resolve_combat(&player, &m, &kind, &CombatRules::default());
        assert_eq!(out.turns, Some(8));
        assert_eq!(out.damage_taken, 56);
        assert_eq!(out.residual_life, 479);
    }

    #[test]
    fn turns_minus_one_skips_final_strike() {
        let player = Stats::new(12, 8, 535);
        let (m, kind) = normal(15, 5, 50);
        let rules = CombatRules {
            monster_strikes: StrikeRule::TurnsMinusOne,
        };
        let out = resolve_combat(&player, &m, &kind, &rules);
        assert_eq!(out.damage_taken, 49);
        assert_eq!(out.residual_life, 486);
    }

    #[test]
    fn vampire_drains_after_each_exchange() {
        // Warrior 10/5/100 vs vampire 15/5/20 at 10% lifesteal.
        // 4 exchanges; per exchange: -10 damage then -floor(0.1*life).
        // 100 -> 90 -> 81 -> 71 -> 64 -> 54 -> 49 -> 39 -> 36.
        let player = Stats::new(10, 5, 100);
        let m = Stats::new(15, 5, 20);
        let kind = MonsterKind::Vampire { lifesteal_pct: 0.1 };
        let out = resolve_combat(&player, &m, &kind, &CombatRules::default());
        assert_eq!(out.turns, Some(4));
        assert_eq!(out.residual_life, 36);
        assert_eq!(out.damage_taken, 64);
    }

    #[test]
    fn lethal_outcome_reports_negative_residual() {
        let player = Stats::new(10, 5, 100);
        let (m, kind) = normal(20, 8, 70);
        let out = resolve_combat(&player, &m, &kind, &CombatRules::default());
        assert_eq!(out.turns, Some(35));
        assert_eq!(out.damage_taken, 525);
        assert_eq!(out.residual_life, -425);
        assert!(out.lethal());
    }
}
