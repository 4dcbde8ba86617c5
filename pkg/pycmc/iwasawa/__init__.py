from .factorization import IwasawaPair, dress_loop, iwasawa
from .qr import is_upper_positive, qr_constant, rq_constant
from .shift import positive_ratio, shift_split
