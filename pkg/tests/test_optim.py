import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from diffcore import Adam, AdamState, Tape, adam_step, mul, parameter, sum_all
from errors import CheckpointError, DimensionError, NonFiniteGradientError


class TestAdamStep:
    """Test cases for the functional Adam update"""
    
    def test_first_step_moves_by_lr(self):
        """Test the bias-corrected first step is lr * sign(g)"""
        p = parameter([[1.0, -1.0]])
        state = AdamState.for_params([p])
        adam_step([p], [np.array([[0.5, -2.0]])], state, lr=0.1, weight_decay=0.0)
        assert np.allclose(p.data, [[0.9, -0.9]], atol=1e-6)
        assert state.steps == [1]
    
    def test_weight_decay_adds_l2_term(self):
        """Test that decay acts like an extra gradient wd * p"""
        decayed = parameter([[2.0]])
        plain = parameter([[2.0]])
        s1, s2 = AdamState.for_params([decayed]), AdamState.for_params([plain])
        adam_step([decayed], [np.array([[0.0]])], s1, lr=0.1, weight_decay=1e-7)
        adam_step([plain], [np.array([[2e-7]])], s2, lr=0.1, weight_decay=0.0)
        assert decayed.data[0, 0] == pytest.approx(plain.data[0, 0])
        assert decayed.data[0, 0] < 2.0
    
    def test_none_gradient_is_skipped(self):
        """Test that an untouched parameter stays put with no step counted"""
        p = parameter([[1.0]])
        state = AdamState.for_params([p])
        adam_step([p], [None], state, lr=0.1)
        assert p.data[0, 0] == 1.0
        assert state.steps == [0]
    
    def test_non_finite_gradient(self):
        """Test that NaN gradients are refused"""
        p = parameter([[1.0]])
        with pytest.raises(NonFiniteGradientError):
            adam_step([p], [np.array([[np.nan]])], AdamState.for_params([p]), lr=0.1)
    
    def test_shape_mismatch(self):
        """Test that a gradient of the wrong shape is refused"""
        p = parameter([[1.0, 2.0]])
        with pytest.raises(DimensionError):
            adam_step([p], [np.zeros((2, 1))], AdamState.for_params([p]), lr=0.1)
    
    def test_length_mismatch(self):
        """Test that params and grads must align"""
        p = parameter([[1.0]])
        with pytest.raises(DimensionError):
            adam_step([p], [], AdamState.for_params([p]), lr=0.1)


class TestAdam:
    """Test cases for the Adam optimizer object"""
    
    def _quadratic_step(self, optimizer, p):
        optimizer.zero_grad()
        with Tape() as tape:
            loss = sum_all(mul(p, p))
        tape.backward(loss)
        optimizer.step()
    
    def test_minimizes_quadratic(self):
        """Test that repeated steps shrink a quadratic"""
        p = parameter([[3.0, -2.0]])
        optimizer = Adam([p], lr=0.1)
        for _ in range(200):
            self._quadratic_step(optimizer, p)
        assert np.all(np.abs(p.data) < 0.1)
    
    def test_set_lr(self):
        """Test changing the learning rate"""
        optimizer = Adam([parameter([[1.0]])], lr=0.01)
        optimizer.set_lr(0.001)
        assert optimizer.lr == 0.001
    
    def test_state_dict_round_trip(self):
        """Test that a restored optimizer continues identically"""
        p1 = parameter([[3.0, -2.0]])
        opt1 = Adam([p1], lr=0.05)
        for _ in range(5):
            self._quadratic_step(opt1, p1)
        
        p2 = parameter(p1.data.copy())
        opt2 = Adam([p2], lr=0.5)
        opt2.load_state_dict(opt1.state_dict())
        assert opt2.lr == 0.05
        
        self._quadratic_step(opt1, p1)
        self._quadratic_step(opt2, p2)
        assert np.array_equal(p1.data, p2.data)
    
    def test_load_wrong_parameter_count(self):
        """Test that a state for another parameter list is refused"""
        state = Adam([parameter([[1.0]]), parameter([[2.0]])]).state_dict()
        with pytest.raises(CheckpointError):
            Adam([parameter([[1.0]])]).load_state_dict(state)
