from typing import List

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.schemas.scenario import ScenarioConfig


class Segment(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str
    scenario: ScenarioConfig
    slots: int = Field(..., ge=1)


class ScheduleConfig(BaseModel):
    """
    A stream of time slots crossing scenario segments.
    Each slot delivers `arrivals_per_slot` labelled adaptation instances (B_t) and
    `test_per_slot` unlabelled instances on which every strategy is scored.
    """
    model_config = ConfigDict(extra="forbid")

    segments: List[Segment] = Field(..., min_length=1)
    arrivals_per_slot: int = Field(5, ge=1, description="N")
    test_per_slot: int = Field(10, ge=1)
    refresh_period: int = Field(60, ge=1, description="Slots between offline-periodic refreshes")

    outer_iterations: int = Field(50, ge=1, description="Online-meta outer updates per slot")
    task_minibatch: int = Field(20, ge=1, description="N_task, sampled with replacement")
    train_per_task: int = Field(4, ge=1, description="N_tr")
    val_per_task: int = Field(4, ge=1, description="N_val")
    inner_steps: int = Field(20, ge=0, description="N_in")
    adapt_steps: int = Field(20, ge=0, description="N_ad")

    mobility_dt_s: float = Field(1.0, gt=0, description="Vehicle movement between consecutive slots")
    ftl_max_epochs: int = Field(20, ge=1)
    upper_bound_pool: int = Field(500, ge=1, description="Matched samples for the scenario-aware model")

    @model_validator(mode="after")
    def _same_problem_size(self):
        first = self.segments[0].scenario
        for seg in self.segments[1:]:
            s = seg.scenario
            if (s.num_antennas, s.num_users, s.power_dbm) != (first.num_antennas, first.num_users, first.power_dbm):
                raise ValueError("all segments must share (M, K, P)")
        return self

    @property
    def total_slots(self) -> int:
        return sum(seg.slots for seg in self.segments)

    def segment_at(self, slot: int) -> Segment:
        start = 0
        for seg in self.segments:
            if slot < start + seg.slots:
                return seg
            start += seg.slots
        raise IndexError(f"slot {slot} beyond schedule of {self.total_slots} slots")

    def boundaries(self) -> List[int]:
        """First slot index of every segment after the first."""
        out, start = [], 0
        for seg in self.segments[:-1]:
            start += seg.slots
            out.append(start)
        return out
