"""Dalvik instruction-stream geometry.

Instruction sizes (in 16-bit code units) for all 256 opcode bytes, plus the
invoke-opcode maps. The size table was generated from the instruction-format
tables published at
https://source.android.com/docs/core/runtime/instruction-formats and covers
DEX versions 035 through 039; spot values are asserted by the test suite.

Three pseudo-instructions are variable-sized and are NOT covered by the
table: packed-switch-payload (ident 0x0100), sparse-switch-payload (0x0200)
and fill-array-data-payload (0x0300). All three share opcode byte 0x00 with
`nop` and are distinguished by the high byte of the first code unit; callers
must compute their size from the payload header.
"""

# fmt: off
OPCODE_UNITS = (
    1, 1, 2, 3, 1, 2, 3, 1, 2, 3, 1, 1, 1, 1, 1, 1,  # 0x00-0x0f
    1, 1, 1, 2, 3, 2, 2, 3, 5, 2, 2, 3, 2, 1, 1, 2,  # 0x10-0x1f
    2, 1, 2, 2, 3, 3, 3, 1, 1, 2, 3, 3, 3, 2, 2, 2,  # 0x20-0x2f
    2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 1, 1,  # 0x30-0x3f
    1, 1, 1, 1, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2,  # 0x40-0x4f
    2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2,  # 0x50-0x5f
    2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 3, 3,  # 0x60-0x6f
    3, 3, 3, 1, 3, 3, 3, 3, 3, 1, 1, 1, 1, 1, 1, 1,  # 0x70-0x7f
    1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1,  # 0x80-0x8f
    2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2,  # 0x90-0x9f
    2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2,  # 0xa0-0xaf
    1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1,  # 0xb0-0xbf
    1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1,  # 0xc0-0xcf
    2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2,  # 0xd0-0xdf
    2, 2, 2, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1,  # 0xe0-0xef
    1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 4, 4, 3, 3, 2, 2,  # 0xf0-0xff
)
# fmt: on

# Same table in bytes, one entry per opcode, for C-speed indexing in the
# stream walker (size * 2 = bytes consumed).
OPCODE_BYTES = bytes(u * 2 for u in OPCODE_UNITS)

# invoke-kind family: 0x6e..0x72 are format 35c, 0x74..0x78 are format 3rc.
# 0x73 (between the two runs) is unused in standard DEX.
INVOKE_35C_FIRST = 0x6E
INVOKE_35C_LAST = 0x72
INVOKE_3RC_FIRST = 0x74
INVOKE_3RC_LAST = 0x78
UNUSED_73 = 0x73

# invoke-polymorphic (0xfa/0xfb) and invoke-custom (0xfc/0xfd) exist from
# DEX 038 on. They are size-skipped during stream walking but never counted
# as call sites: the reference vocabularies target API level 25 where they
# cannot occur.
INVOKE_POLYMORPHIC = 0xFA
INVOKE_CUSTOM = 0xFC

PACKED_SWITCH_IDENT = 0x01  # high byte of first unit; full ident 0x0100
SPARSE_SWITCH_IDENT = 0x02  # 0x0200
FILL_ARRAY_IDENT = 0x03  # 0x0300

OPCODE_NAMES_INVOKE = {
    0x6E: "invoke-virtual",
    0x6F: "invoke-super",
    0x70: "invoke-direct",
    0x71: "invoke-static",
    0x72: "invoke-interface",
    0x74: "invoke-virtual/range",
    0x75: "invoke-super/range",
    0x76: "invoke-direct/range",
    0x77: "invoke-static/range",
    0x78: "invoke-interface/range",
}


def payload_units(data: bytes, pos: int, end: int) -> int:
    """Size in code units of the payload pseudo-instruction at byte ``pos``.

    ``pos`` points at a unit whose low byte is 0x00 and whose high byte is a
    payload ident. ``end`` bounds the readable region.
    """
    ident = data[pos + 1]
    if ident == PACKED_SWITCH_IDENT:
        if pos + 4 > end:
            return -1
        size = data[pos + 2] | (data[pos + 3] << 8)
        return size * 2 + 4
    if ident == SPARSE_SWITCH_IDENT:
        if pos + 4 > end:
            return -1
        size = data[pos + 2] | (data[pos + 3] << 8)
        return size * 4 + 2
    if ident == FILL_ARRAY_IDENT:
        if pos + 8 > end:
            return -1
        width = data[pos + 2] | (data[pos + 3] << 8)
        count = (
            data[pos + 4]
            | (data[pos + 5] << 8)
            | (data[pos + 6] << 16)
            | (data[pos + 7] << 24)
        )
        return (width * count + 1) // 2 + 4
    # nop with a stray high byte: tolerated as a 1-unit nop.
    return 1
