# TransE