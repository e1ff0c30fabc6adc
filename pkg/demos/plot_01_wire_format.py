"""
Encoding and decoding DNS messages
==================================

Build a query, look at its bytes, and decode a response that uses a
compression pointer.
"""

import struct

from tunnelguard.codec import QType, decode, encode, make_query, make_response

# a plain A query for example.com; 12 header octets, then the question
query = make_query("example.com", QType.A, id=0x1234)
wire = encode(query)
print(len(wire), wire.hex(" "))

# responses in the wild point back at the question name (offset 12)
answer = b"\xc0\x0c" + struct.pack("!HHIH", 1, 1, 300, 4) + bytes([93, 184, 216, 34])
header = bytes.fromhex("1234 8180 0001 0001 0000 0000")
response = decode(header + wire[12:] + answer)
print(response.answers[0])

# our own encoder never compresses, so the answer name is spelled out again
reply = make_response(query, 0, response.answers)
print(len(encode(reply)), "octets uncompressed")
