//! Combat resolution checked against an independent strike-by-strike
//! simulator. The oracle knows nothing about the closed form: it swings,
//! lets the monster answer, and stops when the monster's life runs out.

use agent_world::{resolve_combat, CombatRules, MonsterKind, Stats, StrikeRule};
use proptest::prelude::*;

/// Brute-force referee. Warrior strikes first; with `Turns` the monster
/// answers every warrior strike (including the killing blow), with
/// `TurnsMinusOne` it stays silent after the blow that fells it. Vampire
/// drain applies after each monster strike on the warrior's current life,
/// floored, never negative.
fn oracle(player: &Stats, monster: &Stats, kind: &MonsterKind, rules: &CombatRules) -> Option<(u32, i64)> {
    if player.attack <= monster.defense {
        return None;
    }
    let swing = (player.attack - monster.defense) as i64;
    let hit = monster.attack.saturating_sub(player.defense) as i64;
    let mut monster_life = monster.life as i64;
    let mut life = player.life as i64;
    let mut warrior_strikes = 0u32;
    loop {
        monster_life -= swing;
        warrior_strikes += 1;
        let monster_dead = monster_life <= 0;
        if monster_dead && rules.monster_strikes == StrikeRule::TurnsMinusOne {
            break;
        }
        life -= hit;
        if let MonsterKind::Vampire { lifesteal_pct } = kind {
            life -= (lifesteal_pct * life.max(0) as f64).floor() as i64;
        }
        if monster_dead {
            break;
        }
    }
    Some((warrior_strikes, life))
}

fn check_agreement(player: Stats, monster: Stats, kind: MonsterKind, rules: CombatRules) {
    let out = resolve_combat(&player, &monster, &kind, &rules);
    match oracle(&player, &monster, &kind, &rules) {
        None => assert!(!out.feasible, "closed form feasible where oracle refuses: {player:?} vs {monster:?}"),
        Some((strikes, residual)) => {
            assert!(out.feasible);
            assert_eq!(out.turns, Some(strikes), "{player:?} vs {monster:?}");
            assert_eq!(out.residual_life, residual, "{player:?} vs {monster:?} ({kind:?})");
        }
    }
}

#[test]
fn exhaustive_small_cube_matches_oracle() {
    // Full sweep over a smaller cube here; the acceptance suite runs the
    // complete 20^6 sweep.
    let rules = CombatRules::default();
    for a in 1..=8u32 {
        for d in 1..=8u32 {
            for l in 1..=8u32 {
                for am in 1..=8u32 {
                    for dm in 1..=8u32 {
                        for lm in 1..=8u32 {
                            let player = Stats::new(a, d, l);
                            let monster = Stats::new(am, dm, lm);
                            check_agreement(player, monster, MonsterKind::Normal, rules);
                            check_agreement(
                                player,
                                monster,
                                MonsterKind::Vampire { lifesteal_pct: 0.1 },
                                rules,
                            );
                        }
                    }
                }
            }
        }
    }
}

proptest! {
    #[test]
    fn random_stats_match_oracle(
        a in 1u32..200, d in 0u32..100, l in 1u32..2000,
        am in 0u32..200, dm in 0u32..100, lm in 1u32..500,
        vampire in proptest::bool::ANY,
        minus_one in proptest::bool::ANY,
    ) {
        let kind = if vampire {
            MonsterKind::Vampire { lifesteal_pct: 0.1 }
        } else {
            MonsterKind::Normal
        };
        let rules = CombatRules {
            monster_strikes: if minus_one { StrikeRule::TurnsMinusOne } else { StrikeRule::Turns },
        };
        check_agreement(Stats::new(a, d, l), Stats::new(am, dm, lm), kind, rules);
    }
}
