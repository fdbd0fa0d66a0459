"""Shared fixtures: the two published bytecode snippets as dex fixtures,
tiny reference lists, and hypothesis strategies for domain objects."""

from __future__ import annotations

import pytest
from hypothesis import strategies as st

from apksift.invokes import InvokeKind, InvokeSite, MethodRef
from apksift.reference import Granularity, make_reference
from apksift.synth import (
    DexBuilder,
    MethodDef,
    ins_const4,
    ins_if_ne,
    ins_invoke,
    ins_move_object,
    ins_move_result,
    ins_move_result_object,
    ins_return_void,
)

# -- the locker snippet: screen lock + password reset through device admin --


def locker_body():
    return [
        ins_invoke(InvokeKind.Virtual, "android/app/admin/DevicePolicyManager", "lockNow", "()V"),
        ins_move_object(1, 0),
        ins_move_object(2, 1),
        ins_move_result_object(1),
        ins_move_object(2, 7),
        ins_const4(3, 0),
        ins_invoke(
            InvokeKind.Virtual,
            "android/app/admin/DevicePolicyManager",
            "resetPassword",
            "(Ljava/lang/String;I)Z",
        ),
        ins_return_void(),
    ]


# -- the crypto snippet: stream read + cipher flush/close ----------------------


def crypto_body():
    return [
        ins_invoke(InvokeKind.Virtual, "java/io/FileInputStream", "read", "([B)I"),
        ins_move_result(0),
        ins_const4(5, -1),
        ins_if_ne(0, 5, 4),
        ins_invoke(InvokeKind.Virtual, "javax/crypto/CipherOutputStream", "flush", "()V"),
        ins_invoke(InvokeKind.Virtual, "javax/crypto/CipherOutputStream", "close", "()V"),
        ins_invoke(InvokeKind.Virtual, "java/io/FileInputStream", "close", "()V"),
        ins_return_void(),
    ]


def build_single_method_dex(body, class_path="com/fixture/App", method="run"):
    builder = DexBuilder()
    builder.add_class(class_path, [MethodDef(method, "()V", body)])
    return builder.build(), list(builder.expected_invokes)


@pytest.fixture
def locker_dex():
    return build_single_method_dex(locker_body(), class_path="com/fixture/Locker")


@pytest.fixture
def crypto_dex():
    return build_single_method_dex(crypto_body(), class_path="com/fixture/Crypt")


# -- reference subsets matching the worked feature-extraction example ---------


@pytest.fixture
def package_subset():
    return make_reference(Granularity.Package, ["java/io", "javax/crypto", "java/lang"])


@pytest.fixture
def class_subset():
    return make_reference(
        Granularity.Class, ["java/io/FileInputStream", "javax/crypto/CipherOutputStream"]
    )


@pytest.fixture
def method_subset():
    return make_reference(
        Granularity.Method,
        [
            "java/io/FileInputStream;->read",
            "java/io/FileInputStream;->close",
            "javax/crypto/CipherOutputStream;->flush",
            "javax/crypto/CipherOutputStream;->close",
        ],
    )


# -- hypothesis strategies -----------------------------------------------------

_SEGMENT = st.text(alphabet="abcdefghijklmnopqrstuvwxyz0123456789_", min_size=1, max_size=8).filter(
    lambda s: not s[0].isdigit()
)
_CLASS_NAME = st.builds(
    lambda head, tail: head.upper() + tail,
    st.sampled_from("abcdefghijklmnopqrstuvwxyz"),
    st.text(alphabet="abcdefghijklmnopqrstuvwxyzABCDEF0123456789_$", max_size=10),
)


@st.composite
def class_paths(draw):
    segments = draw(st.lists(_SEGMENT, min_size=1, max_size=3))
    return "/".join(segments + [draw(_CLASS_NAME)])


_DESCRIPTORS = st.sampled_from(
    ["()V", "([B)I", "(Ljava/lang/String;)V", "(II)I", "()Ljava/lang/String;", "(J)Z"]
)
_METHOD_NAME = st.sampled_from(
    ["run", "read", "close", "flush", "doFinal", "exec", "a", "b0", "<init>", "toString"]
)


@st.composite
def method_refs(draw):
    return MethodRef.from_class_path(
        draw(class_paths()), draw(_METHOD_NAME), draw(_DESCRIPTORS)
    )


@st.composite
def invoke_sites(draw):
    caller = draw(st.one_of(st.just(""), class_paths()))
    return InvokeSite(draw(st.sampled_from(list(InvokeKind))), caller, draw(method_refs()))


def invoke_lists(max_size=40):
    return st.lists(invoke_sites(), max_size=max_size)
