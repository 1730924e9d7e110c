"""Probabilities and settings needed per method, for one and two qubits."""
from seqpt import builtin_channel, seqpt_full, standard_qpt
from seqpt.tomography import resource_count

print("D,seqpt_element_probabilities,standard_full_probabilities,seqpt_full_settings,standard_settings")
for n in (1, 2):
    D = 2**n
    ch = builtin_channel("identity", n_qubits=n)
    print(f"{D},{resource_count('seqpt-element', D)},{resource_count('standard-full', D)},"
          f"{seqpt_full(ch).n_settings},{standard_qpt(ch).n_settings}")
