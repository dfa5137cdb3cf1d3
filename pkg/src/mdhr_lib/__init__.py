import mdhr_lib.helpers as helpers
import mdhr_lib.libs as libs
