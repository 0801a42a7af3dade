"""MIR compiler and tracing instruction-set simulator for a RISC-V subset."""
