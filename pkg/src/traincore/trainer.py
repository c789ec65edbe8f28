"""
Trainer - two-stage training of the two-stream model with instance refinement
"""
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from config import CHECKPOINT_DIR
from diffcore import Adam, Tape, Tensor, add, take_rows
from errors import ContractViolationError, DomainError, NonFiniteGradientError, TrainingAbortedError
from modelcore import TwoStreamModel, domain_targets, load_checkpoint, save_checkpoint
from refinedqn import InstanceRefiner, build_registry
from synthdomains import (
    DomainDataset,
    batch_iterator,
    held_out_target,
    labeled_target_batches,
    source_batches,
)
from traincore.metrics import EvalRecord, FileMetricsRepository, MetricsRepository, RunMetrics, StepRecord
from traincore.schemas import RunMode, RunSummary, SelectionStats, TrainConfig, config_hash
from utils.logger import get_logger, run_context

logger = get_logger()


def build_refiner(config: TrainConfig, num_modalities: int, seed: int) -> Optional[InstanceRefiner]:
    """Agents for adversarial_ir runs; None for every other mode"""
    if config.mode != RunMode.ADVERSARIAL_IR:
        return None
    if config.agent_kind == "dqn":
        options = dict(
            hidden_dim=config.q_hidden_dim,
            lr=config.effective_dqn_lr,
            replay_capacity=config.replay_capacity,
            betas=config.adam_betas,
            eps=config.adam_eps,
            weight_decay=config.weight_decay,
            leaky_slope=config.leaky_slope,
        )
    else:
        options = dict(replay_capacity=config.replay_capacity)
    registry = build_registry(
        num_modalities,
        config.embed_dim,
        config.candidate_size,
        seed,
        enabled=config.agents.enabled_ids(num_modalities),
        kind=config.agent_kind,
        **options,
    )
    return InstanceRefiner(
        registry,
        num_modalities,
        num_candidates=config.candidate_size,
        terminal_steps=config.terminal_E,
        epsilon=config.epsilon,
        epsilon_final=config.epsilon_final,
        decay_steps=config.scaled_stage2_steps,
        tau_source=config.tau_s,
        tau_target=config.tau_t,
        gamma=config.gamma,
        dqn_batch_size=config.dqn_batch_size,
        reward_timing=config.reward_timing,
        seed=seed,
        record_masks=config.dump_masks,
    )


class Trainer:
    """
    Runs one configuration on one dataset
    
    Every random consumer (initialisation, stage-1 batches, stage-2 batches,
    dropout, agents) draws from its own stream spawned from ``config.seed``.
    """
    
    def __init__(
        self,
        config: TrainConfig,
        dataset: DomainDataset,
        repository: Optional[MetricsRepository] = None,
        checkpoint_dir: Optional[Union[str, Path]] = None,
        variant: Optional[str] = None,
    ):
        self.config = config
        self.dataset = dataset
        self.repository = repository
        self.checkpoint_dir = Path(checkpoint_dir) if checkpoint_dir else None
        self.variant = variant or config.mode.value
        self.config_hash = config_hash(config)
        
        spec = dataset.spec
        init_seq, stage1_seq, stage2_seq, dropout_seq, agent_seq = np.random.SeedSequence(config.seed).spawn(5)
        self._stage1_seed = int(stage1_seq.generate_state(1)[0])
        self._stage2_seed = int(stage2_seq.generate_state(1)[0])
        self._dropout_rng = np.random.default_rng(dropout_seq)
        
        self.model = TwoStreamModel(
            num_modalities=spec.num_modalities,
            feature_dim=spec.feature_dim,
            num_classes=spec.num_classes,
            embed_dim=config.embed_dim,
            hidden_dim=config.hidden_dim,
            disc_hidden_dim=config.disc_hidden_dim,
            dropout=config.dropout,
            grl_scale=config.grl_scale,
            leaky_slope=config.leaky_slope,
            seed=int(init_seq.generate_state(1)[0]),
        )
        self.optimizer = Adam(
            self.model.parameters(),
            lr=config.stage1_lr,
            betas=config.adam_betas,
            eps=config.adam_eps,
            weight_decay=config.weight_decay,
        )
        self.refiner = build_refiner(config, spec.num_modalities, int(agent_seq.generate_state(1)[0]))
        
        labels = [agent_id.label for agent_id in self.refiner.registry.ids()] if self.refiner else []
        self.metrics = RunMetrics(agent_labels=labels, num_modalities=spec.num_modalities)
        self.global_step = 0
        self._last_good: Optional[Dict[str, np.ndarray]] = None
        self._lifetime_counts: Dict[str, List[int]] = {label: [0, 0, 0] for label in labels}
        
        # Every mode is scored on the clean held-out split, never on training segments
        self._eval_segments, self._eval_labels = held_out_target(dataset)
    
    # ---------------------------------------------------------------- helpers
    
    def _snapshot(self):
        self._last_good = self.model.state_dict()
    
    def _abort(self, error: Exception):
        """Write the last good parameters and raise TrainingAbortedError"""
        path = None
        if self._last_good is not None:
            self.model.load_state_dict(self._last_good)
        if self._last_good is not None and self.checkpoint_dir is not None:
            path = save_checkpoint(
                self.checkpoint_dir / "last_good.npz",
                self.model,
                config_hash=self.config_hash,
                extra={"step": self.global_step, "aborted": True},
            )
        logger.error(f"Training aborted at step {self.global_step}: {error}")
        raise TrainingAbortedError(f"non-finite value at step {self.global_step}: {error}", checkpoint_path=path) from error
    
    def _scorers(self):
        return [lambda emb, k=k: self.model.discriminator_logits(emb, k) for k in range(self.model.num_modalities)]
    
    def evaluate(self) -> float:
        return self.model.top1_accuracy(self._eval_segments, self._eval_labels)
    
    def _maybe_evaluate(self, force: bool = False):
        if not force and self.global_step % self.config.eval_every:
            return
        if self.metrics.evaluations and self.metrics.evaluations[-1].step == self.global_step:
            return
        record = EvalRecord(step=self.global_step, accuracy=self.evaluate())
        if self.refiner is not None:
            for agent_id, counts in self.refiner.selection_summary().items():
                record.precision[agent_id.label] = counts.precision
                record.recall[agent_id.label] = counts.recall
                totals = self._lifetime_counts[agent_id.label]
                totals[0] += counts.removed
                totals[1] += counts.removed_negative
                totals[2] += counts.negative_seen
            self.refiner.reset_counts()
        self.metrics.record_evaluation(record)
        self._snapshot()
        logger.debug(f"step {self.global_step}: target top-1 {record.accuracy:.4f}")
    
    def _require_two_stage(self, stage: str):
        if self.config.mode == RunMode.SUPERVISED_TARGET:
            raise ContractViolationError(f"{stage} is not defined for supervised_target; use train_supervised")
    
    def _optimize(self, tape: Tape, loss: Tensor):
        self.optimizer.zero_grad()
        tape.backward(loss)
        self.optimizer.step()
    
    # ----------------------------------------------------------------- stages
    
    def train_stage1(self) -> TwoStreamModel:
        """
        L_cls on all-source batches at stage1_lr
        
        Raises:
            ContractViolationError: the mode is supervised_target
        """
        self._require_two_stage("stage 1")
        steps = self.config.scaled_stage1_steps
        logger.info(f"Stage 1: {steps} steps, lr={self.config.stage1_lr}")
        self.optimizer.set_lr(self.config.stage1_lr)
        self._snapshot()
        batches = source_batches(self.dataset, self.config.stage1_batch, self._stage1_seed)
        
        for _ in range(steps):
            batch = next(batches)
            self.global_step += 1
            try:
                with Tape() as tape:
                    loss = self.model.loss_cls(batch, train=True, rng=self._dropout_rng)
                self._optimize(tape, loss)
            except (DomainError, NonFiniteGradientError) as e:
                self._abort(e)
            self.metrics.record_step(StepRecord(
                step=self.global_step, stage=1, lr=self.optimizer.lr, loss_cls=loss.item(),
            ))
            self._maybe_evaluate()
        logger.info(f"Stage 1 finished at step {self.global_step}")
        return self.model
    
    def _stage2_step(self, batch, stage2_index: int) -> StepRecord:
        model = self.model
        n_source = len(batch.source)
        mode = self.config.mode
        
        masks = None
        if self.refiner is not None and self.refiner.active:
            source_features = model.segment_features(batch.source)
            target_features = model.segment_features(batch.target)
            masks = self.refiner.refine(
                batch.source,
                batch.target,
                [model.embeddings(x, k) for k, x in enumerate(source_features)],
                [model.embeddings(x, k) for k, x in enumerate(target_features)],
                self._scorers(),
                step=stage2_index,
            )
        
        segments = batch.source if mode == RunMode.SOURCE_ONLY else batch.source + batch.target
        labels = [s.class_label for s in batch.source]
        loss_adv = None
        with Tape() as tape:
            embeddings = model.embed(model.segment_features(segments), train=True, rng=self._dropout_rng)
            source_rows = np.arange(n_source)
            if masks is not None and self.config.refine_affects_cls:
                keep_cls = np.logical_and.reduce([m[:n_source] for m in masks])
                source_rows = np.flatnonzero(keep_cls)
            if mode == RunMode.SOURCE_ONLY:
                source_embeddings = embeddings
            else:
                source_embeddings = [take_rows(e, source_rows) for e in embeddings]
            loss_cls = model.labeled_loss(source_embeddings, [labels[i] for i in source_rows])
            total = loss_cls
            if mode != RunMode.SOURCE_ONLY:
                loss_adv = model.adversarial_loss(embeddings, domain_targets(segments), masks)
                total = add(loss_cls, loss_adv)
        self._optimize(tape, total)
        
        record = StepRecord(
            step=self.global_step,
            stage=2,
            lr=self.optimizer.lr,
            loss_cls=loss_cls.item(),
            loss_adv=None if loss_adv is None else loss_adv.item(),
        )
        if mode != RunMode.SOURCE_ONLY:
            record.kept = [len(segments)] * model.num_modalities if masks is None else [int(m.sum()) for m in masks]
        if self.refiner is not None and self.refiner.active:
            report = self.refiner.update_agents(self._scorers())
            record.loss_dqn = report.total_loss
            record.rewards = {agent_id.label: value for agent_id, value in report.mean_rewards.items()}
            if report.dump_rows and self.repository is not None:
                self.repository.append_mask_rows(report.dump_rows)
        return record
    
    def train_stage2(self) -> TwoStreamModel:
        """
        L_cls + L_adv (+ agent updates) on mixed batches at stage2_lr
        
        source_only keeps L_cls alone; adversarial_only never refines.
        """
        self._require_two_stage("stage 2")
        steps = self.config.scaled_stage2_steps
        logger.info(f"Stage 2: {steps} steps, lr={self.config.stage2_lr}, mode={self.config.mode.value}")
        self.optimizer.set_lr(self.config.stage2_lr)
        batches = batch_iterator(self.dataset, self.config.stage2_batch, self._stage2_seed)
        
        for index in range(steps):
            batch = next(batches)
            self.global_step += 1
            try:
                record = self._stage2_step(batch, index)
            except (DomainError, NonFiniteGradientError) as e:
                self._abort(e)
            self.metrics.record_step(record)
            self._maybe_evaluate()
        logger.info(f"Stage 2 finished at step {self.global_step}")
        return self.model
    
    def train_supervised(self) -> TwoStreamModel:
        """Upper bound: fused classifier trained on the labeled target training split"""
        stage1, stage2 = self.config.scaled_stage1_steps, self.config.scaled_stage2_steps
        logger.info(f"Supervised target: {stage1 + stage2} steps")
        self._snapshot()
        batch_size = min(self.config.stage1_batch, len(self.dataset.target))
        batches = labeled_target_batches(self.dataset, batch_size, self._stage1_seed)
        
        for index in range(stage1 + stage2):
            self.optimizer.set_lr(self.config.stage1_lr if index < stage1 else self.config.stage2_lr)
            segments, labels = next(batches)
            self.global_step += 1
            try:
                with Tape() as tape:
                    embeddings = self.model.embed(
                        self.model.segment_features(segments), train=True, rng=self._dropout_rng,
                    )
                    loss = self.model.labeled_loss(embeddings, labels)
                self._optimize(tape, loss)
            except (DomainError, NonFiniteGradientError) as e:
                self._abort(e)
            self.metrics.record_step(StepRecord(
                step=self.global_step, stage=1 if index < stage1 else 2, lr=self.optimizer.lr, loss_cls=loss.item(),
            ))
            self._maybe_evaluate()
        return self.model
    
    # -------------------------------------------------------------------- run
    
    def summary(self) -> RunSummary:
        selection = {label: self._selection_stats(label) for label in self._lifetime_counts}
        accuracies = self.metrics.accuracies()
        return RunSummary(
            variant=self.variant,
            mode=self.config.mode,
            scenario=self.config.scenario,
            seed=self.config.seed,
            final_accuracy=self.metrics.final_accuracy(self.config.last_m),
            last_accuracies=accuracies[-self.config.last_m:],
            num_evaluations=len(accuracies),
            stage1_steps=self.config.scaled_stage1_steps,
            stage2_steps=self.config.scaled_stage2_steps,
            selection=selection,
            config_hash=self.config_hash,
            config=self.config.model_dump(mode="json"),
        )
    
    def _selection_stats(self, label: str) -> SelectionStats:
        counts = self._lifetime_counts[label]
        return SelectionStats(
            removed=counts[0],
            removed_negative=counts[1],
            negative_seen=counts[2],
            precision=counts[1] / counts[0] if counts[0] else None,
            recall=counts[1] / counts[2] if counts[2] else None,
        )
    
    def run(self) -> RunSummary:
        """Train according to the mode, evaluate, persist and return the summary"""
        logger.info(f"Run {self.variant} seed={self.config.seed} scenario={self.config.scenario}")
        if self.config.mode == RunMode.SUPERVISED_TARGET:
            self.train_supervised()
        else:
            self.train_stage1()
            if self.checkpoint_dir is not None:
                save_checkpoint(
                    self.checkpoint_dir / "stage1.npz",
                    self.model,
                    {"model": self.optimizer},
                    config_hash=self.config_hash,
                    extra={"step": self.global_step, "stage": 1},
                )
            self.train_stage2()
        self._maybe_evaluate(force=True)
        
        summary = self.summary()
        if self.repository is not None:
            self.repository.save_metrics(self.metrics)
            self.repository.save_summary(summary)
        if self.checkpoint_dir is not None:
            save_checkpoint(
                self.checkpoint_dir / "final.npz",
                self.model,
                {"model": self.optimizer},
                config_hash=self.config_hash,
                extra={"step": self.global_step},
            )
        logger.info(f"Run {self.variant} seed={self.config.seed}: final top-1 {summary.final_accuracy:.4f}")
        return summary
    
    def resume(self, checkpoint: Union[str, Path]):
        """Load parameters and optimizer state written by ``run``"""
        meta = load_checkpoint(checkpoint, self.model, {"model": self.optimizer}, expected_hash=self.config_hash)
        self.global_step = int(meta.get("step", 0))
        return meta


def run_training(
    config: TrainConfig,
    dataset: DomainDataset,
    run_dir: Optional[Union[str, Path]] = None,
    variant: Optional[str] = None,
) -> RunSummary:
    """
    Train one configuration and write its artifacts to ``run_dir``
    
    Args:
        config: Validated training config
        dataset: Source/target segments
        run_dir: Directory for metrics, summary, mask dump and checkpoints
        variant: Name recorded in the summary (defaults to the mode)
    """
    repository = FileMetricsRepository(run_dir) if run_dir is not None else None
    checkpoint_dir = Path(run_dir) / CHECKPOINT_DIR if run_dir is not None else None
    with run_context(variant or RunMode(config.mode).value, config.seed):
        trainer = Trainer(config, dataset, repository, checkpoint_dir, variant)
        return trainer.run()
