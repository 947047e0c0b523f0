from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from eqembed.expr import ARITY, PI, E, X, Int, Op

settings.register_profile(
    "default", deadline=None, max_examples=150, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

UNARY = sorted(n for n, a in ARITY.items() if a == 1)
BINARY = sorted(n for n, a in ARITY.items() if a == 2)

leaves = st.one_of(
    st.just(X),
    st.just(PI),
    st.just(E),
    st.integers(min_value=-10**6, max_value=10**6).map(Int),
)


def _extend(children):
    return st.one_of(
        st.builds(lambda n, a: Op(n, (a,)), st.sampled_from(UNARY), children),
        st.builds(lambda n, a, b: Op(n, (a, b)), st.sampled_from(BINARY), children, children),
    )


expressions = st.recursive(leaves, _extend, max_leaves=12)

