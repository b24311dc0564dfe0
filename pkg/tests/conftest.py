import os

# cap BLAS threads before numpy loads: single-core timing honesty and
# bit-reproducible reductions
os.environ.setdefault("OMP_NUM_THREADS", "1")
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("MKL_NUM_THREADS", "1")
