"""Action model acquisition over encoded transitions.

``ama1_build`` turns every observed ``(s, t)`` pair into an explicit edge of
a transition graph, which can be written out as grounded STRIPS PDDL.

The learned alternative pairs an :class:`ActionAutoEncoder` (clusters
transitions into at most ``n_actions`` labels, ``f(t, s) = a`` and
``g(a, s) = t_hat``) with an :class:`ActionDiscriminator` that scores whether
``(s, t)`` is a legal transition. Together they give a successor function.
"""
import re
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import ParameterError, ResourceLimitError, ShapeError, TrainingError
from .nn import (
    AdamState,
    Network,
    adam_step,
    backward,
    flat_grads,
    forward,
    make_rng,
    sample_gumbel,
    sigmoid,
    softmax,
)
from .planner import as_bits, state_key
from .sae import TauSchedule, anneal_tau
from .validation import check_bits, check_pairs

DEFAULT_PDDL_BIT_LIMIT = 200


@dataclass
class EncodedTransitions:
    S: np.ndarray
    T: np.ndarray

    def __post_init__(self):
        self.S, self.T = check_pairs(self.S, self.T)

    @classmethod
    def from_images(cls, sae, pre_images, suc_images):
        return cls(sae.transform(pre_images), sae.transform(suc_images))

    @classmethod
    def from_dataset(cls, sae, dataset):
        return cls.from_images(sae, dataset.pre_images, dataset.suc_images)

    @property
    def n_bits(self):
        return self.S.shape[1]

    def __len__(self):
        return len(self.S)

    def pair_keys(self):
        return {(s.tobytes(), t.tobytes()) for s, t in zip(self.S, self.T)}

    def states(self):
        """Distinct encoded states in first-seen order."""
        seen = {}
        for v in np.concatenate([self.S, self.T]):
            seen.setdefault(v.tobytes(), v)
        return np.array(list(seen.values()))


# --- AMA1: the oracle graph -------------------------------------------------

class OracleModel:
    """Deduplicated adjacency of observed encoded transitions."""

    def __init__(self):
        self.nodes = {}
        self.adjacency = {}

    def add_edge(self, s, t):
        s, t = as_bits(s), as_bits(t)
        ks, kt = s.tobytes(), t.tobytes()
        self.nodes.setdefault(ks, s)
        self.nodes.setdefault(kt, t)
        self.adjacency.setdefault(ks, {})
        self.adjacency.setdefault(kt, {})
        self.adjacency[ks].setdefault(kt, None)

    @property
    def n_bits(self):
        return len(next(iter(self.nodes.values()))) if self.nodes else 0

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_edges(self):
        return sum(len(v) for v in self.adjacency.values())

    def __contains__(self, state):
        return state_key(state) in self.nodes

    def successors(self, state):
        return [self.nodes[k] for k in self.adjacency.get(state_key(state), ())]

    def edges(self):
        for ks, children in self.adjacency.items():
            for kt in children:
                yield self.nodes[ks], self.nodes[kt]


def ama1_build(enc):
    if len(enc) == 0:
        raise ParameterError("no transitions to build from")
    oracle = OracleModel()
    for s, t in zip(enc.S, enc.T):
        oracle.add_edge(s, t)
    return oracle


# --- PDDL -------------------------------------------------------------------

def _literals(bits):
    return [f"(b{i}-{'true' if v else 'false'})" for i, v in enumerate(bits)]


@dataclass
class PddlExport:
    domain: str
    problem: str = None
    action_names: list = None


def export_pddl(oracle, domain_name="latent", init=None, goal=None,
                max_bits=DEFAULT_PDDL_BIT_LIMIT):
    """One grounded STRIPS action per distinct oracle edge.

    Preconditions are the full conjunction of the source state's literals;
    effects flip only the bits that change. A problem file is produced when
    both ``init`` and ``goal`` are given.
    """
    n = oracle.n_bits
    if n > max_bits:
        raise ResourceLimitError(f"{n} latent bits exceed the PDDL export bound {max_bits}")
    name = re.sub(r"[^a-z0-9-]", "-", domain_name.lower())
    lines = [
        f"; grounded STRIPS domain over {n} latent bits, {oracle.n_edges} actions",
        "; predicate (bI-true) holds when bit I is 1, (bI-false) when it is 0",
        f"(define (domain {name})",
        "  (:requirements :strips)",
        "  (:predicates " + " ".join(f"(b{i}-true) (b{i}-false)" for i in range(n)) + ")",
    ]
    names = []
    for k, (s, t) in enumerate(oracle.edges()):
        effects = []
        for i in np.flatnonzero(s != t):
            new, old = ("true", "false") if t[i] else ("false", "true")
            effects.append(f"(b{i}-{new}) (not (b{i}-{old}))")
        names.append(f"a{k}")
        lines += [f"  (:action a{k}",
                  "    :parameters ()",
                  "    :precondition (and " + " ".join(_literals(s)) + ")",
                  "    :effect (and " + " ".join(effects) + "))"]
    lines.append(")")
    domain = "\n".join(lines) + "\n"

    problem = None
    if init is not None and goal is not None:
        problem = "\n".join([
            f"(define (problem {name}-problem)",
            f"  (:domain {name})",
            "  (:init " + " ".join(_literals(as_bits(init))) + ")",
            "  (:goal (and " + " ".join(_literals(as_bits(goal))) + ")))",
        ]) + "\n"
    return PddlExport(domain, problem, names)


def parse_sexpr(text):
    """Parse PDDL text (``;`` comments allowed) into nested lists of tokens."""
    text = re.sub(r";[^\n]*", "", text)
    tokens = re.findall(r"\(|\)|[^\s()]+", text)
    stack = [[]]
    for tok in tokens:
        if tok == "(":
            stack.append([])
        elif tok == ")":
            if len(stack) == 1:
                raise ValueError("unbalanced ')'")
            done = stack.pop()
            stack[-1].append(done)
        else:
            stack[-1].append(tok.lower())
    if len(stack) != 1:
        raise ValueError("unbalanced '('")
    return stack[0]


def _atoms(expr):
    """Atoms of a conjunction; returns (positive, negative) sets of names."""
    pos, neg = set(), set()
    if not expr:
        return pos, neg
    if expr[0] == "and":
        for e in expr[1:]:
            p, n = _atoms(e)
            pos |= p
            neg |= n
    elif expr[0] == "not":
        neg.add(expr[1][0])
    else:
        pos.add(expr[0])
    return pos, neg


@dataclass
class StripsAction:
    name: str
    pre: frozenset
    add: frozenset
    delete: frozenset


def check_pddl(domain_text, problem_text=None):
    """Well-formedness check: balanced parentheses and declared predicates only.

    Returns the grounded actions of the domain; raises ``ValueError``.
    """
    forms = parse_sexpr(domain_text)
    if len(forms) != 1 or forms[0][:2] != ["define", forms[0][1]] or forms[0][1][0] != "domain":
        raise ValueError("expected a single (define (domain ...)) form")
    declared = set()
    actions = []
    for part in forms[0][2:]:
        if part[0] == ":predicates":
            declared = {p[0] for p in part[1:]}
        elif part[0] == ":action":
            fields = dict(zip(part[2::2], part[3::2]))
            pre_p, pre_n = _atoms(fields.get(":precondition", []))
            add, delete = _atoms(fields.get(":effect", []))
            used = pre_p | pre_n | add | delete
            if used - declared:
                raise ValueError(f"action {part[1]} uses undeclared {sorted(used - declared)}")
            actions.append(StripsAction(part[1], frozenset(pre_p), frozenset(add),
                                        frozenset(delete)))
    if problem_text is not None:
        pforms = parse_sexpr(problem_text)
        if len(pforms) != 1 or pforms[0][0] != "define":
            raise ValueError("expected a single (define (problem ...)) form")
        for part in pforms[0][2:]:
            if part[0] in (":init", ":goal"):
                atoms = set()
                for e in part[1:]:
                    p, n = _atoms(e)
                    atoms |= p | n
                if atoms - declared:
                    raise ValueError(f"problem uses undeclared {sorted(atoms - declared)}")
    return actions


def state_atoms(bits):
    return frozenset(f"b{i}-{'true' if v else 'false'}" for i, v in enumerate(as_bits(bits)))


def action_chain(actions, states):
    """Names of applicable actions turning each state into the next, or None."""
    chain = []
    for s, t in zip(states, states[1:]):
        now, target = state_atoms(s), state_atoms(t)
        for a in actions:
            if a.pre <= now and (now - a.delete) | a.add == target:
                chain.append(a.name)
                break
        else:
            return None
    return chain


# --- AMA2: action autoencoder ------------------------------------------------

def _bce_logits(y, target):
    return np.logaddexp(0, y) - target * y


class ActionAutoEncoder(BaseEstimator):
    """Clusters ``(s, t)`` transitions into at most ``n_actions`` labels."""

    def __init__(self, n_actions=16, hidden=(256, 256), epochs=300, batch_size=64,
                 learning_rate=3e-3, dropout=0.0, tau_max=5.0, tau_min=0.2,
                 dtype="float32", random_state=0):
        self.n_actions = n_actions
        self.hidden = hidden
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.dropout = dropout
        self.tau_max = tau_max
        self.tau_min = tau_min
        self.dtype = dtype
        self.random_state = random_state

    def _objective(self, S, T, noise, tau, training, rng):
        B = len(S)
        enc = forward(self.encoder_, T, training, rng, side=S)
        z = softmax((enc.output + noise) / tau)
        dec = forward(self.decoder_, z, training, rng, side=S)
        y = dec.logits
        loss = np.sum(_bce_logits(y, T)) / B
        dgrads, dz, _ = backward(self.decoder_, dec, (sigmoid(y) - T) / B, wrt="pre")
        dlogits = z * (dz - np.sum(z * dz, axis=-1, keepdims=True)) / tau
        egrads, _, _ = backward(self.encoder_, enc, dlogits)
        return float(loss), flat_grads(egrads) + flat_grads(dgrads)

    def fit(self, S, T):
        if self.n_actions < 1:
            raise ParameterError("n_actions must be at least 1")
        S, T = check_pairs(S, T)
        dt = np.dtype(self.dtype)
        S, T = S.astype(dt), T.astype(dt)
        n_bits = S.shape[1]
        rng = make_rng(self.random_state)
        hidden = list(self.hidden)
        acts = ["relu"] * len(hidden)
        self.n_bits_ = n_bits
        self.encoder_ = Network.build([n_bits] + hidden + [self.n_actions], acts + ["linear"],
                                      rng, self.dropout, side_dim=n_bits, dtype=dt)
        self.decoder_ = Network.build([self.n_actions] + hidden + [n_bits], acts + ["sigmoid"],
                                      rng, self.dropout, side_dim=n_bits, dtype=dt)
        params = self.encoder_.parameters() + self.decoder_.parameters()
        opt = AdamState.for_params(params, lr=self.learning_rate)
        schedule = TauSchedule(self.tau_max, self.tau_min)
        self.history_ = {"loss": [], "tau": []}
        n = len(S)
        for epoch in range(self.epochs):
            tau = anneal_tau(epoch, self.epochs, schedule)
            order = rng.permutation(n)
            total = 0.0
            for start in range(0, n, self.batch_size):
                idx = order[start:start + self.batch_size]
                noise = sample_gumbel(rng, (len(idx), self.n_actions), dt)
                loss, grads = self._objective(S[idx], T[idx], noise, tau, True, rng)
                if not np.isfinite(loss):
                    raise TrainingError(f"action autoencoder diverged at epoch {epoch}", epoch)
                adam_step(params, grads, opt)
                total += loss * len(idx)
            self.history_["loss"].append(total / n)
            self.history_["tau"].append(tau)
        return self

    def action_logits(self, S, T):
        check_is_fitted(self, "encoder_")
        S, T = check_bits(S, self.n_bits_), check_bits(T, self.n_bits_)
        dt = self.encoder_.dtype
        return forward(self.encoder_, T.astype(dt), side=S.astype(dt)).output

    def encode_actions(self, S, T):
        """Deterministic (argmax) action label of each transition."""
        return np.argmax(self.action_logits(S, T), axis=-1)

    def action_probabilities(self, S, T):
        return softmax(self.action_logits(S, T).astype(np.float64))

    def apply(self, S, actions):
        """``g(a, s)`` thresholded at 0.5."""
        check_is_fitted(self, "decoder_")
        S = check_bits(S, self.n_bits_)
        actions = np.broadcast_to(np.asarray(actions, dtype=int), (len(S),))
        if actions.min() < 0 or actions.max() >= self.n_actions:
            raise ParameterError(f"action index outside [0, {self.n_actions})")
        dt = self.decoder_.dtype
        onehot = np.eye(self.n_actions, dtype=dt)[actions]
        out = forward(self.decoder_, onehot, side=S.astype(dt)).output
        return (out > 0.5).astype(np.uint8)

    def predict(self, S, T):
        """Reconstruct ``t`` through the argmax action label."""
        return self.apply(S, self.encode_actions(S, T))


def aae_train(enc, n_actions, rng=0, **params):
    if n_actions < 2:
        raise ParameterError("need at least two action labels")
    return ActionAutoEncoder(n_actions=n_actions, random_state=rng, **params).fit(enc.S, enc.T)


def aae_apply(aae, s, a):
    return aae.apply(as_bits(s)[None], [a])[0]


# --- AMA2: action discriminator ---------------------------------------------

def negative_sampling(enc, state_pool, rng, ratio=1, max_tries=1000):
    """Pairs ``(s, t')`` with ``t'`` drawn from ``state_pool`` that were never observed."""
    if ratio < 1:
        raise ParameterError("ratio must be at least 1")
    rng = make_rng(rng)
    pool = np.asarray(state_pool, dtype=np.uint8)
    positives = enc.pair_keys()
    S_neg, T_neg = [], []
    for _ in range(ratio):
        for s in enc.S:
            ks = s.tobytes()
            for _ in range(max_tries):
                t = pool[int(rng.integers(len(pool)))]
                if (ks, t.tobytes()) not in positives:
                    break
            else:
                raise ResourceLimitError("state pool too small to draw non-transitions")
            S_neg.append(s)
            T_neg.append(t)
    return np.array(S_neg), np.array(T_neg)


def candidate_negatives(aae, enc):
    """``(s, g(a, s))`` pairs over every state and action that were never observed.

    These are the successors the action autoencoder would propose that the
    observed transitions do not back up; treating them as negatives assumes
    the observed set is complete.
    """
    positives = enc.pair_keys()
    states = np.unique(enc.S, axis=0)
    A = aae.n_actions
    S = np.repeat(states, A, axis=0)
    T = aae.apply(S, np.tile(np.arange(A), len(states)))
    seen = set()
    S_neg, T_neg = [], []
    for s, t in zip(S, T):
        key = (s.tobytes(), t.tobytes())
        if key in positives or key in seen or np.array_equal(s, t):
            continue
        seen.add(key)
        S_neg.append(s)
        T_neg.append(t)
    n = enc.n_bits
    return (np.array(S_neg, dtype=np.uint8).reshape(-1, n),
            np.array(T_neg, dtype=np.uint8).reshape(-1, n))


class ActionDiscriminator(BaseEstimator, ClassifierMixin):
    """Binary classifier on concatenated ``[s, t]`` rows."""

    def __init__(self, hidden=(256, 256), epochs=50, batch_size=64, learning_rate=1e-3,
                 dropout=0.0, dtype="float32", random_state=0):
        self.hidden = hidden
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.dropout = dropout
        self.dtype = dtype
        self.random_state = random_state

    def fit(self, X, y):
        X = np.asarray(X)
        y = np.asarray(y).reshape(-1, 1)
        if X.ndim != 2 or len(X) != len(y):
            raise ShapeError("X must be (n, 2N) with one label per row")
        if len(np.unique(y)) < 2:
            raise ParameterError("both classes are needed")
        dt = np.dtype(self.dtype)
        X, y = X.astype(dt), y.astype(dt)
        rng = make_rng(self.random_state)
        hidden = list(self.hidden)
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = X.shape[1]
        self.network_ = Network.build([X.shape[1]] + hidden + [1],
                                      ["relu"] * len(hidden) + ["sigmoid"], rng,
                                      self.dropout, dtype=dt)
        params = self.network_.parameters()
        opt = AdamState.for_params(params, lr=self.learning_rate)
        self.history_ = {"loss": []}
        n = len(X)
        for epoch in range(self.epochs):
            order = rng.permutation(n)
            total = 0.0
            for start in range(0, n, self.batch_size):
                idx = order[start:start + self.batch_size]
                cache = forward(self.network_, X[idx], True, rng)
                out = cache.logits
                loss = float(np.sum(_bce_logits(out, y[idx])) / len(idx))
                if not np.isfinite(loss):
                    raise TrainingError(f"action discriminator diverged at epoch {epoch}", epoch)
                grads, _, _ = backward(self.network_, cache,
                                       (sigmoid(out) - y[idx]) / len(idx), wrt="pre")
                adam_step(params, flat_grads(grads), opt)
                total += loss * len(idx)
            self.history_["loss"].append(total / n)
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "network_")
        X = np.asarray(X, dtype=self.network_.dtype)
        if X.ndim != 2 or X.shape[1] != self.n_features_in_:
            raise ShapeError(f"expected (n, {self.n_features_in_}) input")
        p = forward(self.network_, X).output[:, 0].astype(np.float64)
        return np.stack([1 - p, p], axis=1)

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(int)


def ad_train(positives, negatives, rng=0, **params):
    S_pos, T_pos = positives
    S_neg, T_neg = negatives
    if len(S_pos) == 0 or len(S_neg) == 0:
        raise ParameterError("both classes must be non-empty")
    X = np.concatenate([np.hstack([S_pos, T_pos]), np.hstack([S_neg, T_neg])])
    y = np.concatenate([np.ones(len(S_pos)), np.zeros(len(S_neg))])
    return ActionDiscriminator(random_state=rng, **params).fit(X, y)


def ad_score(ad, s, t):
    return float(ad.predict_proba(np.hstack([as_bits(s), as_bits(t)])[None])[0, 1])


# --- AMA2: successor function -----------------------------------------------

class LearnedSuccessors:
    """Successor provider combining an action autoencoder and a discriminator."""

    def __init__(self, aae, ad, threshold=0.5):
        if not 0.0 < threshold < 1.0:
            raise ParameterError("threshold must lie strictly between 0 and 1")
        self.aae = aae
        self.ad = ad
        self.threshold = threshold

    def successors(self, s):
        s = as_bits(s)
        A = self.aae.n_actions
        candidates = self.aae.apply(np.repeat(s[None], A, axis=0), np.arange(A))
        seen = {s.tobytes()}
        unique = []
        for c in candidates:
            k = c.tobytes()
            if k not in seen:
                seen.add(k)
                unique.append(c)
        if not unique:
            return []
        unique = np.array(unique)
        scores = self.ad.predict_proba(np.hstack([np.repeat(s[None], len(unique), axis=0),
                                                  unique]))[:, 1]
        return [c for c, p in zip(unique, scores) if p >= self.threshold]

    __call__ = successors


def successors_learned(aae, ad, s, threshold=0.5):
    return LearnedSuccessors(aae, ad, threshold).successors(s)
