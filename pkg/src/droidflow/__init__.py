"""Static call-trace / flow-graph feature extraction and hybrid classification
for disassembled Android apps."""

__version__ = "0.1.0"
