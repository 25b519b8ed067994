use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::block::{
    Block, DataPackage, Digest, MinerKind, Provenance, WalletKey, WalletSet, GENESIS_PARENT,
};
use super::view::{validate_block, ChainView};
use crate::combinatorics::Step;
use crate::error::{Error, Result};
use crate::montecarlo::{draw_step, max_walk_len, trial_stream};
use crate::probability::{check_hash_rate, AttackScenario, DeficitState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RaceStatus {
    Running,
    AttackerWon,
    AttackerLost,
}

/// What the attacker brings to the fork: stolen keys and replacement data
/// for the wallets it wants to falsify.
#[derive(Debug, Clone, Default)]
pub struct Forgery {
    pub stolen_keys: Vec<WalletKey>,
    pub falsified: Vec<(u64, Vec<u8>)>,
}

impl Forgery {
    fn package(&self, wallet_id: u64, time_index: u64, data: Vec<u8>) -> DataPackage {
        match self.stolen_keys.iter().find(|k| k.wallet_id() == wallet_id) {
            Some(key) => key.sign(time_index, data),
            None => DataPackage::unsigned(wallet_id, time_index, data),
        }
    }
}

/// A single authentic branch of `authentic_length` blocks.
pub fn build_authentic(authentic_length: usize, wallets: &WalletSet) -> ChainView {
    let mut view = ChainView::new();
    let mut parent = GENESIS_PARENT;
    for t in 1..=authentic_length as u64 {
        let block = Block::seal(
            t,
            parent,
            wallets.packages(t),
            Provenance::Authentic,
            MinerKind::Honest,
        );
        parent = view.insert(block).expect("parent was just inserted");
    }
    view
}

/// The authentic-versus-counterfeit race after a fork at block `La − 1`.
///
/// `counterfeit_len` counts mined counterfeit blocks starting at `La`, so
/// the deficit is `authentic_len − (La − 1) − counterfeit_len`. The forged
/// block `La` is prepared at launch but only joins the view once the
/// attacker mines it.
#[derive(Debug, Clone)]
pub struct BranchRace {
    view: ChainView,
    wallets: WalletSet,
    shared_prefix_len: usize,
    authentic_len: usize,
    counterfeit_len: usize,
    final_length: usize,
    hash_rate: f64,
    status: RaceStatus,
    authentic_tip: Digest,
    counterfeit_tip: Digest,
    pending: Option<Block>,
    steps: usize,
}

/// Forks `view` at block `target_block − 1` with a falsified copy of block
/// `target_block`. Fails if the falsified block would not pass validation,
/// e.g. when the attacker lacks a key for a wallet it rewrites.
pub fn launch_dsa(
    view: ChainView,
    target_block: usize,
    forgery: &Forgery,
    wallets: &WalletSet,
    final_length: usize,
    hash_rate: f64,
) -> Result<BranchRace> {
    check_hash_rate(hash_rate)?;
    let head = view
        .resolve_longest()
        .ok_or_else(|| Error::domain("view", "no authentic branch"))?;
    let authentic_len = view.get(&head).unwrap().index as usize;
    if authentic_len >= final_length {
        return Err(Error::domain(
            "L0",
            format!("need L0 < L, got L0 = {authentic_len}, L = {final_length}"),
        ));
    }
    if target_block == 0 || target_block > authentic_len {
        return Err(Error::domain(
            "La",
            format!("need 1 <= La <= L0, got La = {target_block}, L0 = {authentic_len}"),
        ));
    }

    let index = target_block as u64;
    let fork_parent = view.ancestor_at(&head, index - 1);
    let fork_digest = fork_parent.map_or(GENESIS_PARENT, |b| b.digest);
    let original = view
        .ancestor_at(&head, index)
        .expect("target lies on the branch");
    let payload = original
        .payload
        .iter()
        .map(
            |pkg| match forgery.falsified.iter().find(|(w, _)| *w == pkg.wallet_id) {
                Some((w, data)) => forgery.package(*w, index, data.clone()),
                None => pkg.clone(),
            },
        )
        .collect();
    let counterfeit = Block::seal(
        index,
        fork_digest,
        payload,
        Provenance::Counterfeit,
        MinerKind::Malicious,
    );
    validate_block(&counterfeit, fork_parent, wallets.registry())
        .map_err(Error::CounterfeitRejected)?;

    Ok(BranchRace {
        view,
        wallets: wallets.clone(),
        shared_prefix_len: target_block - 1,
        authentic_len,
        counterfeit_len: 0,
        final_length,
        hash_rate,
        status: RaceStatus::Running,
        authentic_tip: head,
        counterfeit_tip: fork_digest,
        pending: Some(counterfeit),
        steps: 0,
    })
}

impl BranchRace {
    pub fn status(&self) -> RaceStatus {
        self.status
    }

    pub fn deficit(&self) -> i64 {
        self.authentic_len as i64 - (self.shared_prefix_len + self.counterfeit_len) as i64
    }

    pub fn state(&self) -> DeficitState {
        DeficitState {
            deficit: self.deficit(),
            authentic_length: self.authentic_len,
        }
    }

    pub fn authentic_len(&self) -> usize {
        self.authentic_len
    }

    pub fn counterfeit_len(&self) -> usize {
        self.counterfeit_len
    }

    pub fn shared_prefix_len(&self) -> usize {
        self.shared_prefix_len
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn view(&self) -> &ChainView {
        &self.view
    }

    pub fn counterfeit_tip(&self) -> Digest {
        self.counterfeit_tip
    }

    pub fn authentic_tip(&self) -> Digest {
        self.authentic_tip
    }

    /// One block is mined somewhere: on the counterfeit branch with
    /// probability `I`, otherwise on the authentic branch.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<RaceStatus> {
        if self.status != RaceStatus::Running {
            return Err(Error::RaceFinished(self.status));
        }
        match draw_step(rng, self.hash_rate) {
            Step::Attacker => {
                let block = match self.pending.take() {
                    Some(b) => b,
                    None => {
                        let t = (self.shared_prefix_len + self.counterfeit_len + 1) as u64;
                        Block::seal(
                            t,
                            self.counterfeit_tip,
                            self.wallets.packages(t),
                            Provenance::Counterfeit,
                            MinerKind::Malicious,
                        )
                    }
                };
                self.counterfeit_tip = self.view.insert(block)?;
                self.counterfeit_len += 1;
            }
            Step::Honest => {
                let t = (self.authentic_len + 1) as u64;
                let block = Block::seal(
                    t,
                    self.authentic_tip,
                    self.wallets.packages(t),
                    Provenance::Authentic,
                    MinerKind::Honest,
                );
                self.authentic_tip = self.view.insert(block)?;
                self.authentic_len += 1;
            }
        }
        self.steps += 1;

        let state = self.state();
        if state.is_success(self.final_length) {
            self.status = RaceStatus::AttackerWon;
        } else if state.is_failure(self.final_length) {
            self.status = RaceStatus::AttackerLost;
        }
        debug_assert!(
            !(self.authentic_len == self.final_length && self.status == RaceStatus::Running),
            "race reached L without resolving"
        );
        Ok(self.status)
    }

    /// Steps until the race resolves, reporting the state after launch and
    /// after every step.
    pub fn run_observed<R: Rng + ?Sized>(
        &mut self,
        rng: &mut R,
        mut visit: impl FnMut(DeficitState),
    ) -> Result<RaceStatus> {
        let cap = max_walk_len(self.deficit(), self.authentic_len, self.final_length);
        visit(self.state());
        while self.status == RaceStatus::Running {
            self.step(rng)?;
            if self.steps > cap {
                return Err(Error::Invariant(format!("race exceeded {cap} steps")));
            }
            visit(self.state());
        }
        Ok(self.status)
    }

    pub fn run<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<RaceStatus> {
        self.run_observed(rng, |_| {})
    }
}

/// Advances `race` by one mined block.
pub fn step_race<R: Rng + ?Sized>(race: &mut BranchRace, rng: &mut R) -> Result<RaceStatus> {
    race.step(rng)
}

/// Wallets and forgery used for repeated races.
#[derive(Debug, Clone)]
pub struct RaceSetup {
    pub wallets: WalletSet,
    pub forgery: Forgery,
}

impl RaceSetup {
    /// Three wallets; the attacker holds wallet 0's key and rewrites its
    /// data in the target block.
    pub fn standard() -> Self {
        let wallets = WalletSet::new(3, 0);
        let forgery = Forgery {
            stolen_keys: vec![wallets.key(0).unwrap().clone()],
            falsified: vec![(0, b"falsified reading".to_vec())],
        };
        Self { wallets, forgery }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RaceRecord {
    pub won: bool,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RaceSummary {
    pub wins: u64,
    pub runs: u64,
    pub p_hat: f64,
    pub stderr: f64,
    pub mean_steps: f64,
}

/// Runs trial `trial` of `scenario` on a fresh copy of `base`.
pub fn run_race_trial(
    scenario: &AttackScenario,
    base: &ChainView,
    setup: &RaceSetup,
    seed: u64,
    trial: u64,
) -> Result<RaceRecord> {
    let mut race = launch_dsa(
        base.clone(),
        scenario.target_block,
        &setup.forgery,
        &setup.wallets,
        scenario.final_length,
        scenario.hash_rate,
    )?;
    let mut rng = trial_stream(seed, trial);
    let status = race.run(&mut rng)?;
    Ok(RaceRecord {
        won: status == RaceStatus::AttackerWon,
        steps: race.steps(),
    })
}

/// Per-trial race records `0..runs`, in trial order. Trial `k` consumes the
/// same stream as Monte Carlo trial `k`.
pub fn race_records(
    scenario: &AttackScenario,
    runs: u64,
    seed: u64,
    setup: &RaceSetup,
) -> Result<Vec<RaceRecord>> {
    scenario.validate()?;
    let base = build_authentic(scenario.authentic_length, &setup.wallets);
    (0..runs)
        .into_par_iter()
        .map(|k| run_race_trial(scenario, &base, setup, seed, k))
        .collect()
}

pub fn race_estimate(
    scenario: &AttackScenario,
    runs: u64,
    seed: u64,
    setup: &RaceSetup,
) -> Result<RaceSummary> {
    if runs == 0 {
        return Err(Error::domain("runs", "need at least one run"));
    }
    let records = race_records(scenario, runs, seed, setup)?;
    let wins = records.iter().filter(|r| r.won).count() as u64;
    let total_steps: usize = records.iter().map(|r| r.steps).sum();
    let p_hat = wins as f64 / runs as f64;
    Ok(RaceSummary {
        wins,
        runs,
        p_hat,
        stderr: (p_hat * (1.0 - p_hat) / runs as f64).sqrt(),
        mean_steps: total_steps as f64 / runs as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::super::view::{resolve_longest, validate_chain, Violation};
    use super::*;

    fn launch(l0: usize, la: usize, l: usize, i: f64) -> BranchRace {
        let setup = RaceSetup::standard();
        let view = build_authentic(l0, &setup.wallets);
        launch_dsa(view, la, &setup.forgery, &setup.wallets, l, i).unwrap()
    }

    #[test]
    fn authentic_chain_shape() {
        let wallets = WalletSet::new(3, 0);
        let view = build_authentic(3, &wallets);
        assert_eq!(view.len(), 3);
        assert!(validate_chain(&view, wallets.registry()).is_valid());
        let one = build_authentic(1, &wallets);
        assert_eq!(one.blocks().next().unwrap().parent_digest, GENESIS_PARENT);
        assert!(validate_chain(&build_authentic(60, &wallets), wallets.registry()).is_valid());
    }

    #[test]
    fn launch_sets_initial_deficit() {
        assert_eq!(launch(5, 5, 10, 0.3).deficit(), 1);
        assert_eq!(launch(60, 1, 100, 0.3).deficit(), 60);
    }

    #[test]
    fn launch_rejects_bad_targets() {
        let setup = RaceSetup::standard();
        let view = build_authentic(5, &setup.wallets);
        assert!(launch_dsa(view.clone(), 0, &setup.forgery, &setup.wallets, 10, 0.3).is_err());
        assert!(launch_dsa(view.clone(), 6, &setup.forgery, &setup.wallets, 10, 0.3).is_err());
        assert!(launch_dsa(view, 3, &setup.forgery, &setup.wallets, 5, 0.3).is_err());
    }

    #[test]
    fn attack_needs_the_stolen_key() {
        let setup = RaceSetup::standard();
        let view = build_authentic(5, &setup.wallets);
        let no_keys = Forgery {
            stolen_keys: vec![],
            falsified: setup.forgery.falsified.clone(),
        };
        let err = launch_dsa(view.clone(), 3, &no_keys, &setup.wallets, 10, 0.5).unwrap_err();
        assert_eq!(
            err,
            Error::CounterfeitRejected(Violation::BadSignature {
                index: 3,
                wallet_id: 0
            })
        );
        // a key for a different wallet does not help
        let wrong_key = Forgery {
            stolen_keys: vec![setup.wallets.key(1).unwrap().clone()],
            falsified: setup.forgery.falsified.clone(),
        };
        assert!(launch_dsa(view, 3, &wrong_key, &setup.wallets, 10, 0.5).is_err());
    }

    #[test]
    fn certain_attacker_wins_in_two_steps() {
        let mut race = launch(5, 5, 10, 1.0);
        let mut rng = trial_stream(0, 0);
        assert_eq!(step_race(&mut race, &mut rng).unwrap(), RaceStatus::Running);
        assert_eq!(
            step_race(&mut race, &mut rng).unwrap(),
            RaceStatus::AttackerWon
        );
        assert_eq!(race.steps(), 2);
        assert_eq!(resolve_longest(race.view()), Some(race.counterfeit_tip()));
        assert!(matches!(
            step_race(&mut race, &mut rng),
            Err(Error::RaceFinished(RaceStatus::AttackerWon))
        ));
    }

    #[test]
    fn powerless_attacker_loses_at_final_length() {
        let mut race = launch(6, 2, 15, 0.0);
        let mut rng = trial_stream(0, 0);
        assert_eq!(race.run(&mut rng).unwrap(), RaceStatus::AttackerLost);
        assert_eq!(race.steps(), 15 - 6);
        assert_eq!(race.authentic_len(), 15);
        assert_eq!(resolve_longest(race.view()), Some(race.authentic_tip()));
    }

    #[test]
    fn finished_race_chain_is_valid() {
        let setup = RaceSetup::standard();
        for trial in 0..20 {
            let view = build_authentic(8, &setup.wallets);
            let mut race = launch_dsa(view, 6, &setup.forgery, &setup.wallets, 20, 0.45).unwrap();
            let mut rng = trial_stream(11, trial);
            let status = race.run(&mut rng).unwrap();
            assert!(validate_chain(race.view(), setup.wallets.registry()).is_valid());
            let winner = resolve_longest(race.view()).unwrap();
            let head = race.view().get(&winner).unwrap();
            match status {
                RaceStatus::AttackerWon => {
                    assert_eq!(winner, race.counterfeit_tip());
                    assert_eq!(
                        race.view().ancestor_at(&winner, 6).unwrap().provenance,
                        Provenance::Counterfeit
                    );
                }
                RaceStatus::AttackerLost => {
                    assert_eq!(head.index, 20);
                    assert_eq!(head.provenance, Provenance::Authentic);
                }
                RaceStatus::Running => unreachable!(),
            }
        }
    }
}
