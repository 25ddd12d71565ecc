# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled activity-record parser.

Accepts the same grammar as the pure Python backend in _fallback.py; the two
are interchangeable and covered by parity tests. This one scans the byte
buffer in a single pass with no per-line allocation on the happy path.
"""

from cpython.bytes cimport PyBytes_AS_STRING, PyBytes_GET_SIZE

import numpy as np
cimport numpy as cnp

cnp.import_array()

BACKEND = "native"

cdef unsigned long long U64_MAX = 18446744073709551615


cdef inline int _days_in_month(int y, int m) noexcept nogil:
    if m == 2:
        if (y % 4 == 0 and y % 100 != 0) or y % 400 == 0:
            return 29
        return 28
    if m == 4 or m == 6 or m == 9 or m == 11:
        return 30
    return 31


cdef inline long long _days_from_civil(int y, int m, int d) noexcept nogil:
    # Proleptic Gregorian day count relative to 1970-01-01. Matches
    # datetime.date(y, m, d).toordinal() - date(1970, 1, 1).toordinal().
    cdef long long era, yoe, doy, doe
    if m <= 2:
        y -= 1
    era = (y if y >= 0 else y - 399) // 400
    yoe = y - era * 400
    doy = (153 * (m - 3 if m > 2 else m + 9) + 2) // 5 + d - 1
    doe = yoe * 365 + yoe // 4 - yoe // 100 + doy
    return era * 146097 + doe - 719468


def parse_activity(bytes buf, long first_line=1):
    """Parse one buffer of complete activity lines.

    Returns (days, ips, hits, bad, n_lines); see _fallback.parse_activity.
    """
    cdef const unsigned char* s = <const unsigned char*> PyBytes_AS_STRING(buf)
    cdef Py_ssize_t n = PyBytes_GET_SIZE(buf)
    # Smallest valid record is 20 bytes plus newline; cap the record arrays
    # by lines, bounded by that.
    cdef Py_ssize_t cap = n // 21 + 2
    cdef cnp.ndarray[cnp.int32_t, ndim=1] days = np.empty(cap, np.int32)
    cdef cnp.ndarray[cnp.uint32_t, ndim=1] ips = np.empty(cap, np.uint32)
    cdef cnp.ndarray[cnp.uint64_t, ndim=1] hits = np.empty(cap, np.uint64)
    cdef cnp.int32_t* days_p = <cnp.int32_t*> days.data
    cdef cnp.uint32_t* ips_p = <cnp.uint32_t*> ips.data
    cdef cnp.uint64_t* hits_p = <cnp.uint64_t*> hits.data
    bad = []

    cdef Py_ssize_t i = 0, k = 0
    cdef long line = first_line - 1
    cdef long long n_lines = 0
    cdef int year, month, day, octet, j, q, digits
    cdef unsigned int ip
    cdef unsigned long long value
    cdef unsigned char c
    cdef const char* reason

    while i < n:
        line += 1
        n_lines += 1
        reason = NULL

        # Blank line (bare newline or CR+newline): no record.
        if s[i] == 10:
            i += 1
            continue
        if s[i] == 13 and i + 1 < n and s[i + 1] == 10:
            i += 2
            continue
        if s[i] == 13 and i + 1 == n:
            break

        # Date: YYYY-MM-DD
        year = month = day = 0
        if i + 10 > n:
            reason = "malformed date"
        else:
            for j in range(4):
                c = s[i + j]
                if c < 48 or c > 57:
                    reason = "malformed date"
                    break
                year = year * 10 + (c - 48)
            if reason == NULL and (s[i + 4] != 45 or s[i + 7] != 45):
                reason = "malformed date"
            if reason == NULL:
                for j in range(5, 7):
                    c = s[i + j]
                    if c < 48 or c > 57:
                        reason = "malformed date"
                        break
                    month = month * 10 + (c - 48)
            if reason == NULL:
                for j in range(8, 10):
                    c = s[i + j]
                    if c < 48 or c > 57:
                        reason = "malformed date"
                        break
                    day = day * 10 + (c - 48)
        if reason == NULL:
            if year < 1 or month < 1 or month > 12 or day < 1 or day > _days_in_month(year, month):
                reason = "malformed date"
        if reason == NULL:
            i += 10
            if i >= n or s[i] != 44:
                reason = "expected 3 comma-separated fields"
            else:
                i += 1

        # Address: canonical dotted quad.
        ip = 0
        if reason == NULL:
            for q in range(4):
                octet = 0
                digits = 0
                while i < n and 48 <= s[i] <= 57:
                    if digits == 3:
                        digits = 4
                        break
                    octet = octet * 10 + (s[i] - 48)
                    digits += 1
                    i += 1
                if digits == 0 or digits == 4 or octet > 255:
                    reason = "malformed address"
                    break
                # No leading zeros: "0" alone is fine, "01" is not.
                if (digits == 2 and octet < 10) or (digits == 3 and octet < 100):
                    reason = "malformed address"
                    break
                ip = (ip << 8) | <unsigned int> octet
                if q < 3:
                    if i < n and s[i] == 46:
                        i += 1
                    else:
                        reason = "malformed address"
                        break
            if reason == NULL:
                if i < n and s[i] == 44:
                    i += 1
                elif i < n and s[i] == 46:
                    reason = "malformed address"
                else:
                    reason = "expected 3 comma-separated fields"

        # Hit count: decimal in [1, 2**64 - 1].
        if reason == NULL:
            value = 0
            digits = 0
            while i < n and 48 <= s[i] <= 57:
                c = s[i] - 48
                if value > (U64_MAX - c) // 10:
                    reason = "hit count out of range"
                    break
                value = value * 10 + c
                digits += 1
                i += 1
            if reason == NULL and digits == 0:
                reason = "malformed hit count"
            if reason == NULL and value < 1:
                reason = "hit count out of range"

        # Line terminator: optional CR, then newline or end of buffer.
        if reason == NULL:
            if i < n and s[i] == 13:
                i += 1
            if i < n and s[i] != 10:
                reason = "malformed hit count"

        if reason == NULL:
            days_p[k] = <cnp.int32_t> _days_from_civil(year, month, day)
            ips_p[k] = ip
            hits_p[k] = value
            k += 1
            if i < n:
                i += 1
            continue

        bad.append((line, (<bytes> reason).decode("ascii")))
        while i < n and s[i] != 10:
            i += 1
        if i < n:
            i += 1

    return days[:k], ips[:k], hits[:k], bad, int(n_lines)
