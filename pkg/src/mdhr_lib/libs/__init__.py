import mdhr_lib.libs.tensor as tensor
import mdhr_lib.libs.model as model
import mdhr_lib.libs.data as data
import mdhr_lib.libs.objective as objective
import mdhr_lib.libs.trainer as trainer
