ACK_ROUTING_REVERSED = "reversed-tuple"
ACK_ROUTING_SYMMETRIC = "symmetric"
ACK_ROUTING_CHOICES = (
    (ACK_ROUTING_REVERSED, ACK_ROUTING_REVERSED),
    (ACK_ROUTING_SYMMETRIC, ACK_ROUTING_SYMMETRIC),
)

NO_ROUTE_MESSAGE = "{switch} has no uplink toward host {dst}"
UNATTACHED_HOST_MESSAGE = "packet for host {host} arrived but no endpoint is attached"
CONSERVATION_MESSAGE = (
    "packet conservation broken: injected {injected} != delivered {delivered} "
    "+ dropped {dropped} + queued {queued}"
)
